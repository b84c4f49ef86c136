#pragma once

#include <span>
#include <string>
#include <vector>

#include "factrl/rewards.hpp"

namespace factrl::eval {

struct MetricsRecord {
  int iteration = 0;
  double mean_r_final = 0.0;
  double mean_r_ent = 0.0;
  double mean_r_log = 0.0;
  double mean_r_fmt = 0.0;
  double mean_r_rep = 0.0;
  double kl = 0.0;
  double entity_precision = 1.0;
  double format_compliance = 0.0;
  double mean_repetition_ratio = 0.0;
};

std::string to_jsonl(const MetricsRecord& m);
MetricsRecord metrics_from_jsonl(std::string_view line);

struct ScoredOutput {
  std::vector<std::string> tokens;
  std::string query_id;
};

// Sum(CE) / (Sum(CE) + Sum(IE)); 1.0 when there are no matches at all.
double entity_precision(std::span<const ScoredOutput> outputs,
                        const std::vector<rewards::GazetteerEntry>& gazetteer);

/// Judge scores in the five dimensions, one card per (model, judge).
struct JudgeScorecard {
  std::string model_id;
  double think = 0.0;
  double answer = 0.0;
  double historical_accuracy = 0.0;
  double logical_reasoning = 0.0;
  double problem_solving = 0.0;
  std::string judge_id;
};

std::string to_jsonl(const JudgeScorecard& c);
JudgeScorecard scorecard_from_jsonl(std::string_view line);
std::vector<JudgeScorecard> load_scorecards(const std::string& path);

inline constexpr const char* kScoreDimensions[5] = {
    "think", "answer", "historical_accuracy", "logical_reasoning", "problem_solving"};

struct ScoreAggregate {
  std::string model_id;
  double mean[5] = {0, 0, 0, 0, 0};
  double stddev[5] = {0, 0, 0, 0, 0};  // population std across judges
  std::size_t cards = 0;
};

// Per-model, per-dimension means and across-judge population standard
// deviations. Rows sorted by model_id. Scale bounds validate each card.
std::vector<ScoreAggregate> aggregate_scorecards(std::span<const JudgeScorecard> cards,
                                                 double scale_min = 0.0,
                                                 double scale_max = 10.0);

std::string to_jsonl(const ScoreAggregate& a);

// Aligned plain-text table of the aggregate rows.
std::string format_aggregate_table(std::span<const ScoreAggregate> rows);

}  // namespace factrl::eval
