#include "factrl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "factrl/text.hpp"
#include "json.hpp"

namespace factrl::rewards {

using nlohmann::json;

void GazetteerEntry::validate() const {
  if (canonical.empty()) throw std::invalid_argument("gazetteer entry has empty canonical");
  if (std::find(aliases.begin(), aliases.end(), canonical) == aliases.end()) {
    throw std::invalid_argument("canonical '" + canonical + "' not listed in its aliases");
  }
}

std::string to_jsonl(const GazetteerEntry& e) {
  json j{{"canonical", e.canonical},
         {"aliases", e.aliases},
         {"required_context", e.required_context},
         {"relevant_queries", e.relevant_queries}};
  return j.dump();
}

GazetteerEntry gazetteer_entry_from_jsonl(std::string_view line) {
  json j = json::parse(line);
  GazetteerEntry e;
  e.canonical = j.at("canonical").get<std::string>();
  e.aliases = j.at("aliases").get<std::vector<std::string>>();
  e.required_context = j.value("required_context", std::vector<std::string>{});
  e.relevant_queries = j.value("relevant_queries", std::vector<std::string>{});
  e.validate();
  return e;
}

std::vector<GazetteerEntry> load_gazetteer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gazetteer file: " + path);
  std::vector<GazetteerEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(gazetteer_entry_from_jsonl(line));
  }
  return out;
}

void RewardWeights::validate() const {
  if (w_c < 0 || w_i < 0) throw std::invalid_argument("w_c and w_i must be nonnegative");
  if (w1 < 0 || w2 < 0 || w3 < 0 || w4 < 0) {
    throw std::invalid_argument("component weights w1..w4 must be nonnegative");
  }
  if (std::abs(w1 + w2 + w3 + w4 - 1.0) > 1e-12) {
    throw std::invalid_argument("component weights must satisfy w1+w2+w3+w4 = 1");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("epsilon must be in (0,1)");
  }
  if (beta < 0) throw std::invalid_argument("beta must be nonnegative");
  if (mpv > 0) throw std::invalid_argument("mpv must be nonpositive");
  if (n < 1) throw std::invalid_argument("n-gram order must be >= 1");
}

std::string to_jsonl(const RewardBreakdown& b) {
  json j{{"r_ent", b.r_ent},
         {"r_log", b.r_log},
         {"r_fmt", b.r_fmt},
         {"r_rep", b.r_rep},
         {"r_final", b.r_final}};
  return j.dump();
}

namespace {

struct Candidate {
  std::size_t start;
  std::size_t len;          // in tokens
  std::size_t alias_bytes;  // folded alias byte length
  std::size_t entry_idx;
  std::size_t alias_idx;
};

bool context_satisfied(const GazetteerEntry& entry,
                       const std::vector<std::string>& folded_tokens) {
  if (entry.required_context.empty()) return true;
  for (const auto& term : entry.required_context) {
    std::string folded = text::ascii_fold(term);
    for (const auto& tok : folded_tokens) {
      if (tok.find(folded) != std::string::npos) return true;
    }
  }
  return false;
}

}  // namespace

EntityMatchReport match_entities(std::span<const std::string> output,
                                 const std::string& query_id,
                                 const std::vector<GazetteerEntry>& gazetteer) {
  EntityMatchReport report;
  for (const auto& e : gazetteer) {
    if (std::find(e.relevant_queries.begin(), e.relevant_queries.end(), query_id) !=
        e.relevant_queries.end()) {
      report.expected.push_back(e.canonical);
    }
  }
  if (report.expected.empty()) {
    throw std::invalid_argument("query id '" + query_id + "' unknown to the gazetteer");
  }

  std::vector<std::string> folded;
  folded.reserve(output.size());
  for (const auto& t : output) folded.push_back(text::ascii_fold(t));

  std::vector<Candidate> candidates;
  for (std::size_t ei = 0; ei < gazetteer.size(); ++ei) {
    for (std::size_t ai = 0; ai < gazetteer[ei].aliases.size(); ++ai) {
      std::vector<std::string> alias_toks;
      std::size_t bytes = 0;
      for (const auto& t : text::split_whitespace(gazetteer[ei].aliases[ai])) {
        alias_toks.push_back(text::ascii_fold(t));
        bytes += alias_toks.back().size();
      }
      if (alias_toks.empty() || alias_toks.size() > folded.size()) continue;
      for (std::size_t s = 0; s + alias_toks.size() <= folded.size(); ++s) {
        bool hit = true;
        for (std::size_t k = 0; k < alias_toks.size(); ++k) {
          if (folded[s + k] != alias_toks[k]) {
            hit = false;
            break;
          }
        }
        if (hit) candidates.push_back({s, alias_toks.size(), bytes, ei, ai});
      }
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.len != b.len) return a.len > b.len;
    if (a.alias_bytes != b.alias_bytes) return a.alias_bytes > b.alias_bytes;
    if (a.start != b.start) return a.start < b.start;
    if (a.entry_idx != b.entry_idx) return a.entry_idx < b.entry_idx;
    return a.alias_idx < b.alias_idx;
  });

  std::vector<bool> taken(output.size(), false);
  std::vector<Candidate> accepted;
  for (const auto& c : candidates) {
    bool free = true;
    for (std::size_t k = c.start; k < c.start + c.len; ++k) {
      if (taken[k]) {
        free = false;
        break;
      }
    }
    if (!free) continue;
    for (std::size_t k = c.start; k < c.start + c.len; ++k) taken[k] = true;
    accepted.push_back(c);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const Candidate& a, const Candidate& b) { return a.start < b.start; });

  for (const auto& c : accepted) {
    const auto& entry = gazetteer[c.entry_idx];
    bool relevant = std::find(entry.relevant_queries.begin(), entry.relevant_queries.end(),
                              query_id) != entry.relevant_queries.end();
    if (relevant && context_satisfied(entry, folded)) {
      report.correct.push_back({entry.canonical, {c.start, c.len}});
    } else {
      std::string surface;
      for (std::size_t k = c.start; k < c.start + c.len; ++k) {
        if (!surface.empty()) surface += ' ';
        surface += output[k];
      }
      report.incorrect.push_back({surface, {c.start, c.len}});
    }
  }
  report.ce = report.correct.size();
  report.ie = report.incorrect.size();
  return report;
}

double entity_reward(const EntityMatchReport& report, const RewardWeights& w) {
  return w.w_c * static_cast<double>(report.ce) - w.w_i * static_cast<double>(report.ie);
}

double format_reward(std::span<const std::string> output, const corpus::MarkerPair& markers) {
  std::size_t begins = 0, ends = 0;
  std::size_t first_begin = 0, first_end = 0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    if (output[i] == markers.begin) {
      if (begins == 0) first_begin = i;
      ++begins;
    } else if (output[i] == markers.end) {
      if (ends == 0) first_end = i;
      ++ends;
    }
  }
  return (begins == 1 && ends == 1 && first_begin < first_end) ? 1.0 : 0.0;
}

double repetition_ratio(std::span<const std::string> output, int n) {
  if (n < 1) throw std::invalid_argument("n-gram order must be >= 1");
  const std::size_t len = output.size();
  if (len < static_cast<std::size_t>(n)) return 0.0;
  const std::size_t total = len - static_cast<std::size_t>(n) + 1;
  std::unordered_set<std::string> distinct;
  for (std::size_t s = 0; s < total; ++s) {
    std::string key;
    for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
      key += output[s + k];
      key += '\x01';
    }
    distinct.insert(std::move(key));
  }
  return 1.0 - static_cast<double>(distinct.size()) / static_cast<double>(total);
}

double repetition_penalty(std::span<const std::string> output, int n, double mpv) {
  if (mpv > 0) throw std::invalid_argument("mpv must be nonpositive");
  return repetition_ratio(output, n) * mpv;
}

namespace {

// Strips surrounding punctuation; returns folded content or "" if the token
// is punctuation-only.
std::string content_of(const std::string& token, const std::set<char32_t>& terminals) {
  static const std::set<char32_t> extra =
      corpus::terminals_from_string("，,、：:「」『』（）()\"'<>|");
  std::vector<char32_t> cps = text::to_codepoints(token);
  std::size_t b = 0, e = cps.size();
  auto is_punct = [&](char32_t c) { return terminals.count(c) || extra.count(c); };
  while (b < e && is_punct(cps[b])) ++b;
  while (e > b && is_punct(cps[e - 1])) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) out += text::encode_utf8(cps[i]);
  return text::ascii_fold(out);
}

}  // namespace

CoherenceScorer default_coherence_scorer(const corpus::MarkerPair& markers) {
  return [markers](std::span<const std::string> output, const corpus::ContextWindow*) {
    const auto terminals = corpus::default_terminals();
    // Thought span: inside the balanced marker pair when present, else the
    // whole output.
    std::size_t begin = 0, end = output.size();
    if (format_reward(output, markers) == 1.0) {
      for (std::size_t i = 0; i < output.size(); ++i) {
        if (output[i] == markers.begin) begin = i + 1;
        if (output[i] == markers.end) end = i;
      }
    }
    std::vector<std::unordered_set<std::string>> sentences;
    std::unordered_set<std::string> current;
    bool open = false;
    for (std::size_t i = begin; i < end; ++i) {
      const std::string& tok = output[i];
      if (tok == markers.begin || tok == markers.end) continue;
      open = true;
      std::string content = content_of(tok, terminals);
      if (!content.empty()) current.insert(content);
      std::vector<char32_t> cps = text::to_codepoints(tok);
      if (!cps.empty() && terminals.count(cps.back())) {
        sentences.push_back(std::move(current));
        current.clear();
        open = false;
      }
    }
    if (open) sentences.push_back(std::move(current));
    if (sentences.size() <= 1) return 1.0;
    std::size_t shared = 0;
    for (std::size_t i = 0; i + 1 < sentences.size(); ++i) {
      bool overlap = false;
      for (const auto& t : sentences[i]) {
        if (sentences[i + 1].count(t)) {
          overlap = true;
          break;
        }
      }
      if (overlap) ++shared;
    }
    return static_cast<double>(shared) / static_cast<double>(sentences.size() - 1);
  };
}

double coherence_reward(std::span<const std::string> output,
                        const corpus::ContextWindow* window,
                        const CoherenceScorer& scorer) {
  double v = scorer(output, window);
  if (v < 0.0 || v > 1.0) throw std::out_of_range("coherence scorer returned value outside [0,1]");
  return v;
}

RewardBreakdown final_reward(std::span<const std::string> output,
                             const std::string& query_id,
                             const std::vector<GazetteerEntry>& gazetteer,
                             const RewardWeights& w,
                             const corpus::MarkerPair& markers,
                             const CoherenceScorer& scorer) {
  w.validate();
  RewardBreakdown b;
  b.r_ent = entity_reward(match_entities(output, query_id, gazetteer), w);
  b.r_log = coherence_reward(output, nullptr, scorer);
  b.r_fmt = format_reward(output, markers);
  b.r_rep = repetition_penalty(output, w.n, w.mpv);
  b.r_final = w.w1 * b.r_ent + w.w2 * b.r_log + w.w3 * b.r_fmt + w.w4 * b.r_rep;
  return b;
}

}  // namespace factrl::rewards
