#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "factrl/corpus.hpp"

namespace factrl::rewards {

/// A ground-truth entity: the reference for entity rewards. `canonical`
/// must be nonempty and listed among `aliases`.
struct GazetteerEntry {
  std::string canonical;
  std::vector<std::string> aliases;
  // Terms, any one of which must co-occur in the output for a usage to
  // count as factually aligned. Empty = no constraint.
  std::vector<std::string> required_context;
  // Query ids this entity is an expected answer for.
  std::vector<std::string> relevant_queries;

  void validate() const;
};

std::string to_jsonl(const GazetteerEntry& e);
GazetteerEntry gazetteer_entry_from_jsonl(std::string_view line);
std::vector<GazetteerEntry> load_gazetteer(const std::string& path);

/// All reward hyperparameters. w1..w4 weight entity, logic, format and
/// repetition components and must sum to 1.
struct RewardWeights {
  double w_c = 1.0;
  double w_i = 1.0;
  double w1 = 0.4;
  double w2 = 0.2;
  double w3 = 0.2;
  double w4 = 0.2;
  double epsilon = 0.2;  // clip half-width, in (0,1)
  double beta = 0.04;    // KL coefficient
  double mpv = -1.0;     // max penalty value, nonpositive
  int n = 3;             // n-gram order

  void validate() const;  // throws std::invalid_argument naming the violation
};

struct Span {
  std::size_t start = 0;
  std::size_t len = 0;
};

struct EntityMatch {
  std::string entry;  // canonical id of the matched gazetteer entry
  Span span;
};

struct SurfaceMatch {
  std::string surface;
  Span span;
};

struct EntityMatchReport {
  std::vector<EntityMatch> correct;
  std::vector<SurfaceMatch> incorrect;
  std::size_t ce = 0;
  std::size_t ie = 0;
  // Canonical ids of every entry relevant to the query, so callers can
  // reason about expected-but-absent entities.
  std::vector<std::string> expected;
};

struct RewardBreakdown {
  double r_ent = 0.0;
  double r_log = 0.0;
  double r_fmt = 0.0;
  double r_rep = 0.0;
  double r_final = 0.0;
};

std::string to_jsonl(const RewardBreakdown& b);

// Alias lookup against the gazetteer. Matching is case-insensitive for
// Latin scripts and exact for CJK; spans are non-overlapping, selected
// longest-alias-first with left-to-right tie-breaking. An occurrence is
// correct iff its entry lists query_id AND (required_context empty or some
// required term occurs in the output); otherwise it is incorrect.
// Throws std::invalid_argument if no entry references query_id.
EntityMatchReport match_entities(std::span<const std::string> output,
                                 const std::string& query_id,
                                 const std::vector<GazetteerEntry>& gazetteer);

// ER = w_c * CE - w_i * IE
double entity_reward(const EntityMatchReport& report, const RewardWeights& w);

// 1.0 iff exactly one balanced begin/end thought-marker pair, begin first.
double format_reward(std::span<const std::string> output, const corpus::MarkerPair& markers);

// RR = 1 - distinct/total n-grams (0 when there are no n-grams).
double repetition_ratio(std::span<const std::string> output, int n);

// RP = RR * mpv, in [mpv, 0].
double repetition_penalty(std::span<const std::string> output, int n, double mpv);

using CoherenceScorer =
    std::function<double(std::span<const std::string>, const corpus::ContextWindow*)>;

// Fraction of adjacent sentence pairs inside the thought span sharing at
// least one content token; 1.0 for a single sentence or less.
CoherenceScorer default_coherence_scorer(const corpus::MarkerPair& markers);

double coherence_reward(std::span<const std::string> output,
                        const corpus::ContextWindow* window,
                        const CoherenceScorer& scorer);

// R_final = w1*R_ent + w2*R_log + w3*R_fmt + w4*R_rep.
RewardBreakdown final_reward(std::span<const std::string> output,
                             const std::string& query_id,
                             const std::vector<GazetteerEntry>& gazetteer,
                             const RewardWeights& w,
                             const corpus::MarkerPair& markers,
                             const CoherenceScorer& scorer);

}  // namespace factrl::rewards
