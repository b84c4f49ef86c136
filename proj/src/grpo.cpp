#include "factrl/grpo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "factrl/text.hpp"
#include "json.hpp"

namespace factrl::grpo {

using nlohmann::json;

SurrogateMode surrogate_mode_from_string(std::string_view s) {
  if (s == "paper_literal") return SurrogateMode::PaperLiteral;
  if (s == "ppo_style") return SurrogateMode::PPOStyle;
  throw std::invalid_argument("unknown surrogate_mode: " + std::string(s));
}

NormalizationMode normalization_mode_from_string(std::string_view s) {
  if (s == "paper_global") return NormalizationMode::PaperGlobal;
  if (s == "per_output") return NormalizationMode::PerOutput;
  throw std::invalid_argument("unknown normalization_mode: " + std::string(s));
}

std::string to_string(SurrogateMode m) {
  return m == SurrogateMode::PaperLiteral ? "paper_literal" : "ppo_style";
}

std::string to_string(NormalizationMode m) {
  return m == NormalizationMode::PaperGlobal ? "paper_global" : "per_output";
}

void TrainConfig::validate() const {
  if (G < 2) throw std::invalid_argument("group size G must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0,1)");
  if (beta < 0) throw std::invalid_argument("beta must be nonnegative");
  if (learning_rate < 0) throw std::invalid_argument("learning_rate must be nonnegative");
  if (iterations < 1) throw std::invalid_argument("iterations must be positive");
  if (prompts_per_iter < 1) throw std::invalid_argument("prompts_per_iter must be positive");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

std::vector<double> compute_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("advantage groups need G >= 2");
  const double g = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= g;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  double std_pop = std::sqrt(var / g);
  std::vector<double> adv(rewards.size(), 0.0);
  if (std_pop == 0.0) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i] = (rewards[i] - mean) / (std_pop + 1e-8);
  }
  return adv;
}

double clip_ratio(double r, double epsilon) {
  if (r <= 0) throw std::invalid_argument("probability ratio must be positive");
  return std::min(r, std::clamp(r, 1.0 - epsilon, 1.0 + epsilon));
}

namespace {

void check_group(const RolloutGroup& group) {
  if (group.outputs.size() != group.old_logprobs.size() ||
      group.outputs.size() != group.advantages.size()) {
    throw std::invalid_argument("rollout group fields have mismatched sizes");
  }
  for (std::size_t i = 0; i < group.outputs.size(); ++i) {
    if (group.outputs[i].size() != group.old_logprobs[i].size() ||
        group.outputs[i].size() != group.advantages[i].size()) {
      throw std::invalid_argument("output length mismatch with old log-probs or advantages");
    }
  }
}

std::size_t total_length(const RolloutGroup& group) {
  std::size_t n = 0;
  for (const auto& o : group.outputs) n += o.size();
  return n;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t iter, std::uint64_t slot) {
  return splitmix64(splitmix64(master ^ (iter * 0x100000001B3ULL)) ^ slot);
}

}  // namespace

double surrogate(const RolloutGroup& group, const policy::PolicyParams& params,
                 const TrainConfig& config) {
  check_group(group);
  const double g = static_cast<double>(group.outputs.size());
  const std::size_t total = total_length(group);
  if (total == 0) return 0.0;

  double global_sum = 0.0;
  double per_output_sum = 0.0;
  for (std::size_t i = 0; i < group.outputs.size(); ++i) {
    auto lp_new = policy::sequence_logprob(params, group.prompt, group.outputs[i]);
    double output_sum = 0.0;
    for (std::size_t t = 0; t < lp_new.size(); ++t) {
      double r = std::exp(lp_new[t] - group.old_logprobs[i][t]);
      double a = group.advantages[i][t];
      double term;
      if (config.surrogate_mode == SurrogateMode::PaperLiteral) {
        term = clip_ratio(r, config.epsilon) * a;
      } else {
        double clipped = std::clamp(r, 1.0 - config.epsilon, 1.0 + config.epsilon);
        term = std::min(r * a, clipped * a);
      }
      output_sum += term;
    }
    global_sum += output_sum;
    if (!group.outputs[i].empty()) {
      per_output_sum += output_sum / static_cast<double>(group.outputs[i].size());
    }
  }
  if (config.normalization_mode == NormalizationMode::PaperGlobal) {
    return global_sum / (g * static_cast<double>(total));
  }
  return per_output_sum / g;
}

double kl_term(const policy::PolicyParams& params, const policy::PolicyParams& ref,
               const RolloutGroup& group) {
  if (!(params.vocab == ref.vocab)) {
    throw std::invalid_argument("policy and reference vocabularies differ");
  }
  const std::size_t total = total_length(group);
  if (total == 0) return 0.0;
  double sum = 0.0;
  for (const auto& output : group.outputs) {
    auto lp_new = policy::sequence_logprob(params, group.prompt, output);
    auto lp_ref = policy::sequence_logprob(ref, group.prompt, output);
    for (std::size_t t = 0; t < output.size(); ++t) {
      double rho = std::exp(lp_ref[t] - lp_new[t]);
      sum += rho - std::log(rho) - 1.0;
    }
  }
  return sum / static_cast<double>(total);
}

double objective(const RolloutGroup& group, const policy::PolicyParams& params,
                 const policy::PolicyParams& ref, const TrainConfig& config) {
  return surrogate(group, params, config) - config.beta * kl_term(params, ref, group);
}

namespace {

// Accumulates scale * d(objective)/d(logits) into `grad`.
void accumulate_objective_grad(const RolloutGroup& group, const policy::PolicyParams& params,
                               const policy::PolicyParams& ref, const TrainConfig& config,
                               double scale, std::vector<double>& grad) {
  check_group(group);
  if (!(params.vocab == ref.vocab)) {
    throw std::invalid_argument("policy and reference vocabularies differ");
  }
  const double g = static_cast<double>(group.outputs.size());
  const std::size_t total = total_length(group);
  if (total == 0) return;
  const int v = params.vocab.size();

  for (std::size_t i = 0; i < group.outputs.size(); ++i) {
    const auto& output = group.outputs[i];
    auto trace = policy::context_trace(params.vocab, group.prompt, output);
    auto lp_ref = policy::sequence_logprob(ref, group.prompt, output);
    double norm;
    if (config.normalization_mode == NormalizationMode::PaperGlobal) {
      norm = 1.0 / (g * static_cast<double>(total));
    } else {
      norm = output.empty() ? 0.0 : 1.0 / (g * static_cast<double>(output.size()));
    }
    for (std::size_t t = 0; t < output.size(); ++t) {
      auto p = policy::next_distribution(params, trace[t].first, trace[t].second);
      int o = params.vocab.index(output[t]);
      double lp_new = std::log(p[static_cast<std::size_t>(o)]);
      double r = std::exp(lp_new - group.old_logprobs[i][t]);
      double a = group.advantages[i][t];

      // d(surrogate term)/d(log pi_theta(o|ctx)) = coef_surr.
      double coef_surr = 0.0;
      if (config.surrogate_mode == SurrogateMode::PaperLiteral) {
        if (r <= 1.0 + config.epsilon) coef_surr = r * a;
      } else {
        double clipped = std::clamp(r, 1.0 - config.epsilon, 1.0 + config.epsilon);
        if (r * a <= clipped * a) coef_surr = r * a;
      }
      coef_surr *= norm;

      // KL estimator k = rho - ln(rho) - 1; dk/d(logits) = (1-rho)(onehot-p).
      double rho = std::exp(lp_ref[t] - lp_new);
      double coef_kl = (1.0 - rho) / static_cast<double>(total);

      double coef = scale * (coef_surr - config.beta * coef_kl);
      if (coef == 0.0) continue;
      std::size_t off = params.row_offset(trace[t].first, trace[t].second);
      for (int k = 0; k < v; ++k) {
        double onehot = (k == o) ? 1.0 : 0.0;
        grad[off + static_cast<std::size_t>(k)] += coef * (onehot - p[static_cast<std::size_t>(k)]);
      }
    }
  }
}

}  // namespace

std::vector<double> objective_grad(const RolloutGroup& group,
                                   const policy::PolicyParams& params,
                                   const policy::PolicyParams& ref,
                                   const TrainConfig& config) {
  std::vector<double> grad(params.logits.size(), 0.0);
  accumulate_objective_grad(group, params, ref, config, 1.0, grad);
  return grad;
}

std::vector<Prompt> load_prompts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prompts file: " + path);
  std::vector<Prompt> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    json j = json::parse(line);
    Prompt p;
    p.tokens = j.at("prompt").get<std::vector<std::string>>();
    p.query_id = j.at("query_id").get<std::string>();
    out.push_back(std::move(p));
  }
  return out;
}

std::string to_jsonl(const Prompt& p) {
  json j{{"prompt", p.tokens}, {"query_id", p.query_id}};
  return j.dump();
}

RolloutGroup rollout(const policy::PolicyParams& sampler_params, const Prompt& prompt,
                     int G, int max_len, std::uint64_t seed,
                     const std::vector<rewards::GazetteerEntry>& gazetteer,
                     const rewards::RewardWeights& weights,
                     const corpus::MarkerPair& markers,
                     const rewards::CoherenceScorer& scorer) {
  RolloutGroup group;
  group.prompt = prompt.tokens;
  group.query_id = prompt.query_id;
  std::mt19937_64 rng(seed);
  std::vector<double> finals;
  for (int i = 0; i < G; ++i) {
    auto sampled = policy::sample_sequence(sampler_params, prompt.tokens, max_len, rng);
    auto breakdown = rewards::final_reward(sampled.tokens, prompt.query_id, gazetteer, weights,
                                           markers, scorer);
    finals.push_back(breakdown.r_final);
    group.outputs.push_back(std::move(sampled.tokens));
    group.old_logprobs.push_back(std::move(sampled.logprobs));
    group.breakdowns.push_back(breakdown);
  }
  auto scalars = compute_advantages(finals);
  for (int i = 0; i < G; ++i) {
    group.advantages.emplace_back(group.outputs[static_cast<std::size_t>(i)].size(),
                                  scalars[static_cast<std::size_t>(i)]);
  }
  return group;
}

TrainResult train(const TrainConfig& config, std::span<const Prompt> prompts,
                  const std::vector<rewards::GazetteerEntry>& gazetteer,
                  const rewards::RewardWeights& weights, const policy::PolicyParams& init,
                  const MetricsSink& sink) {
  config.validate();
  weights.validate();
  if (prompts.empty()) throw std::invalid_argument("prompt list must be nonempty");

  const corpus::MarkerPair markers;
  const auto scorer = rewards::default_coherence_scorer(markers);
  TrainResult result{init, {}};
  const policy::PolicyParams& ref = init;

  for (int iter = 0; iter < config.iterations; ++iter) {
    const policy::PolicyParams old = result.params;

    const int n_groups = config.prompts_per_iter;
    std::vector<RolloutGroup> groups(static_cast<std::size_t>(n_groups));
    auto roll_one = [&](int j) {
      const Prompt& prompt =
          prompts[(static_cast<std::size_t>(iter) * static_cast<std::size_t>(n_groups) +
                   static_cast<std::size_t>(j)) %
                  prompts.size()];
      std::uint64_t s = derive_seed(config.seed, static_cast<std::uint64_t>(iter),
                                    static_cast<std::uint64_t>(j));
      groups[static_cast<std::size_t>(j)] = rollout(old, prompt, config.G, config.max_len, s,
                                                    gazetteer, weights, markers, scorer);
    };
    if (config.threads <= 1 || n_groups == 1) {
      for (int j = 0; j < n_groups; ++j) roll_one(j);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> workers;
      int n_workers = std::min(config.threads, n_groups);
      for (int w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
          for (int j = next.fetch_add(1); j < n_groups; j = next.fetch_add(1)) roll_one(j);
        });
      }
      for (auto& t : workers) t.join();
    }

    // Gradient accumulation is serial and index-ordered, so results are
    // bit-identical at any thread count.
    std::vector<double> grad(result.params.logits.size(), 0.0);
    for (const auto& group : groups) {
      accumulate_objective_grad(group, result.params, ref, config,
                                1.0 / static_cast<double>(n_groups), grad);
    }
    for (double x : grad) {
      if (!std::isfinite(x)) {
        throw std::runtime_error("non-finite gradient at iteration " + std::to_string(iter) +
                                 " (learning-rate blow-up?)");
      }
    }
    for (std::size_t k = 0; k < grad.size(); ++k) {
      result.params.logits[k] += config.learning_rate * grad[k];
    }

    eval::MetricsRecord rec;
    rec.iteration = iter;
    std::size_t n_outputs = 0;
    std::vector<eval::ScoredOutput> scored;
    double kl_sum = 0.0;
    for (const auto& group : groups) {
      for (std::size_t i = 0; i < group.outputs.size(); ++i) {
        const auto& b = group.breakdowns[i];
        rec.mean_r_final += b.r_final;
        rec.mean_r_ent += b.r_ent;
        rec.mean_r_log += b.r_log;
        rec.mean_r_fmt += b.r_fmt;
        rec.mean_r_rep += b.r_rep;
        rec.mean_repetition_ratio += rewards::repetition_ratio(group.outputs[i], weights.n);
        scored.push_back({group.outputs[i], group.query_id});
        ++n_outputs;
      }
      kl_sum += kl_term(result.params, ref, group);
    }
    const double dn = static_cast<double>(n_outputs);
    rec.mean_r_final /= dn;
    rec.mean_r_ent /= dn;
    rec.mean_r_log /= dn;
    rec.mean_r_fmt /= dn;
    rec.mean_r_rep /= dn;
    rec.mean_repetition_ratio /= dn;
    rec.format_compliance = rec.mean_r_fmt;
    rec.kl = kl_sum / static_cast<double>(groups.size());
    rec.entity_precision = eval::entity_precision(scored, gazetteer);
    if (sink) sink(rec);
    result.metrics.push_back(rec);
  }
  return result;
}

}  // namespace factrl::grpo
