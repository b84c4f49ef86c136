#include "factrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace factrl::policy {

using nlohmann::json;

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2) throw std::invalid_argument("vocabulary needs at least 2 tokens");
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw std::invalid_argument("duplicate vocabulary token: " + tokens_[i]);
    }
  }
  auto pad_it = index_.find(kPadToken);
  auto eos_it = index_.find(kEosToken);
  if (pad_it == index_.end() || eos_it == index_.end()) {
    throw std::invalid_argument("vocabulary must contain pad and eos tokens");
  }
  pad_ = pad_it->second;
  eos_ = eos_it->second;
}

int Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw std::invalid_argument("token not in vocabulary: " + token);
  return it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) != 0; }

const std::string& Vocabulary::token(int idx) const {
  if (idx < 0 || idx >= size()) throw std::out_of_range("vocabulary index out of range");
  return tokens_[static_cast<std::size_t>(idx)];
}

PolicyParams::PolicyParams(Vocabulary v) : vocab(std::move(v)) {
  const std::size_t n = static_cast<std::size_t>(vocab.size());
  logits.assign(n * n * n, 0.0);
}

std::size_t PolicyParams::row_offset(int prev2, int prev1) const {
  const std::size_t n = static_cast<std::size_t>(vocab.size());
  return (static_cast<std::size_t>(prev2) * n + static_cast<std::size_t>(prev1)) * n;
}

std::span<double> PolicyParams::row(int prev2, int prev1) {
  return {logits.data() + row_offset(prev2, prev1), static_cast<std::size_t>(vocab.size())};
}

std::span<const double> PolicyParams::row(int prev2, int prev1) const {
  return {logits.data() + row_offset(prev2, prev1), static_cast<std::size_t>(vocab.size())};
}

namespace {

std::vector<double> softmax(std::span<const double> row) {
  double m = *std::max_element(row.begin(), row.end());
  std::vector<double> p(row.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    p[i] = std::exp(row[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<int> to_indices(const Vocabulary& vocab, std::span<const std::string> tokens) {
  std::vector<int> idx;
  idx.reserve(tokens.size());
  for (const auto& t : tokens) idx.push_back(vocab.index(t));
  return idx;
}

double draw_unit(std::mt19937_64& rng) {
  // 53-bit mantissa draw; keeps trajectories bit-identical for equal seeds.
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace

std::vector<double> next_distribution(const PolicyParams& params, int prev2, int prev1) {
  if (prev2 < 0 || prev2 >= params.vocab.size() || prev1 < 0 || prev1 >= params.vocab.size()) {
    throw std::out_of_range("context token index out of range");
  }
  return softmax(params.row(prev2, prev1));
}

std::vector<double> next_distribution(const PolicyParams& params, const std::string& prev2,
                                      const std::string& prev1) {
  return next_distribution(params, params.vocab.index(prev2), params.vocab.index(prev1));
}

SampledSequence sample_sequence(const PolicyParams& params,
                                std::span<const std::string> prompt, int max_len,
                                std::mt19937_64& rng) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  std::vector<int> ctx = {params.vocab.pad(), params.vocab.pad()};
  for (int i : to_indices(params.vocab, prompt)) ctx.push_back(i);

  SampledSequence out;
  for (int step = 0; step < max_len; ++step) {
    int prev2 = ctx[ctx.size() - 2];
    int prev1 = ctx[ctx.size() - 1];
    std::vector<double> p = next_distribution(params, prev2, prev1);
    double u = draw_unit(rng);
    double acc = 0.0;
    int pick = params.vocab.size() - 1;
    for (int i = 0; i < params.vocab.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.tokens.push_back(params.vocab.token(pick));
    out.logprobs.push_back(std::log(p[static_cast<std::size_t>(pick)]));
    ctx.push_back(pick);
    if (pick == params.vocab.eos()) break;
  }
  return out;
}

std::vector<std::pair<int, int>> context_trace(const Vocabulary& vocab,
                                               std::span<const std::string> prompt,
                                               std::span<const std::string> output) {
  std::vector<int> ctx = {vocab.pad(), vocab.pad()};
  for (int i : to_indices(vocab, prompt)) ctx.push_back(i);
  std::vector<std::pair<int, int>> trace;
  trace.reserve(output.size());
  for (const auto& tok : output) {
    trace.emplace_back(ctx[ctx.size() - 2], ctx[ctx.size() - 1]);
    ctx.push_back(vocab.index(tok));
  }
  return trace;
}

std::vector<double> sequence_logprob(const PolicyParams& params,
                                     std::span<const std::string> prompt,
                                     std::span<const std::string> output) {
  auto trace = context_trace(params.vocab, prompt, output);
  std::vector<double> lp;
  lp.reserve(output.size());
  for (std::size_t t = 0; t < output.size(); ++t) {
    std::vector<double> p = next_distribution(params, trace[t].first, trace[t].second);
    lp.push_back(std::log(p[static_cast<std::size_t>(params.vocab.index(output[t]))]));
  }
  return lp;
}

LogprobGrad logprob_grad(const PolicyParams& params, std::span<const std::string> prompt,
                         std::span<const std::string> output, std::size_t t) {
  if (t >= output.size()) throw std::out_of_range("gradient step index out of range");
  auto trace = context_trace(params.vocab, prompt, output);
  LogprobGrad g;
  g.row_offset = params.row_offset(trace[t].first, trace[t].second);
  g.row = next_distribution(params, trace[t].first, trace[t].second);
  for (double& v : g.row) v = -v;
  g.row[static_cast<std::size_t>(params.vocab.index(output[t]))] += 1.0;
  return g;
}

void save_checkpoint(const PolicyParams& params, const std::string& path) {
  const int v = params.vocab.size();
  json j{{"vocab", params.vocab.tokens()},
         {"shape", {v, v, v}},
         {"logits", params.logits}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump() << '\n';
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string line;
  std::getline(in, line);
  json j = json::parse(line);
  PolicyParams params{Vocabulary(j.at("vocab").get<std::vector<std::string>>())};
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  const auto v = static_cast<std::size_t>(params.vocab.size());
  if (shape != std::vector<std::size_t>{v, v, v}) {
    throw std::runtime_error("checkpoint shape header does not match vocabulary");
  }
  params.logits = j.at("logits").get<std::vector<double>>();
  if (params.logits.size() != v * v * v) {
    throw std::runtime_error("checkpoint logit tensor has wrong size");
  }
  for (double x : params.logits) {
    if (!std::isfinite(x)) throw std::runtime_error("checkpoint contains non-finite logits");
  }
  return params;
}

}  // namespace factrl::policy
