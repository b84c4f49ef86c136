#include <algorithm>
#include <random>

#include "doctest.h"
#include "factrl/eval.hpp"

using namespace factrl;
using eval::JudgeScorecard;
using eval::ScoredOutput;

namespace {

std::vector<rewards::GazetteerEntry> gaz() {
  rewards::GazetteerEntry tang;
  tang.canonical = "Tang";
  tang.aliases = {"Tang"};
  tang.relevant_queries = {"q_shang"};
  rewards::GazetteerEntry yu;
  yu.canonical = "Yu";
  yu.aliases = {"Yu"};
  yu.relevant_queries = {"q_xia"};
  return {tang, yu};
}

}  // namespace

TEST_CASE("entity_precision") {
  auto g = gaz();

  std::vector<ScoredOutput> all_correct = {{{"Tang"}, "q_shang"}, {{"Yu"}, "q_xia"}};
  CHECK(eval::entity_precision(all_correct, g) == doctest::Approx(1.0));

  // 9 correct mentions and 1 incorrect across outputs -> 0.9
  std::vector<ScoredOutput> mixed;
  for (int i = 0; i < 9; ++i) mixed.push_back({{"Tang"}, "q_shang"});
  mixed.push_back({{"Yu"}, "q_shang"});
  CHECK(eval::entity_precision(mixed, g) == doctest::Approx(0.9));

  std::vector<ScoredOutput> all_wrong = {{{"Yu"}, "q_shang"}, {{"Tang"}, "q_xia"}};
  CHECK(eval::entity_precision(all_wrong, g) == doctest::Approx(0.0));

  // vacuous: no mentions at all
  std::vector<ScoredOutput> silent = {{{"nothing", "here"}, "q_shang"}};
  CHECK(eval::entity_precision(silent, g) == doctest::Approx(1.0));
  CHECK(eval::entity_precision({}, g) == doctest::Approx(1.0));
}

TEST_CASE("entity_precision is invariant to output order") {
  auto g = gaz();
  std::vector<ScoredOutput> outs = {{{"Tang"}, "q_shang"},
                                    {{"Yu"}, "q_shang"},
                                    {{"Yu", "Yu"}, "q_xia"},
                                    {{"plain"}, "q_xia"}};
  double base = eval::entity_precision(outs, g);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(outs.begin(), outs.end(), rng);
    CHECK(eval::entity_precision(outs, g) == doctest::Approx(base));
  }
}

TEST_CASE("metrics jsonl round trip") {
  eval::MetricsRecord m;
  m.iteration = 42;
  m.mean_r_final = 0.125;
  m.mean_r_ent = -1.5;
  m.mean_r_log = 0.75;
  m.mean_r_fmt = 1.0;
  m.mean_r_rep = -0.25;
  m.kl = 0.0625;
  m.entity_precision = 0.9;
  m.format_compliance = 0.5;
  m.mean_repetition_ratio = 0.3;
  auto m2 = eval::metrics_from_jsonl(eval::to_jsonl(m));
  CHECK(m2.iteration == m.iteration);
  CHECK(m2.mean_r_final == m.mean_r_final);
  CHECK(m2.mean_r_ent == m.mean_r_ent);
  CHECK(m2.mean_r_log == m.mean_r_log);
  CHECK(m2.mean_r_fmt == m.mean_r_fmt);
  CHECK(m2.mean_r_rep == m.mean_r_rep);
  CHECK(m2.kl == m.kl);
  CHECK(m2.entity_precision == m.entity_precision);
  CHECK(m2.format_compliance == m.format_compliance);
  CHECK(m2.mean_repetition_ratio == m.mean_repetition_ratio);
}

TEST_CASE("scorecard jsonl round trip") {
  JudgeScorecard c{"model-a", 7.5, 8.0, 6.5, 9.0, 5.5, "judge-1"};
  auto c2 = eval::scorecard_from_jsonl(eval::to_jsonl(c));
  CHECK(c2.model_id == c.model_id);
  CHECK(c2.think == c.think);
  CHECK(c2.answer == c.answer);
  CHECK(c2.historical_accuracy == c.historical_accuracy);
  CHECK(c2.logical_reasoning == c.logical_reasoning);
  CHECK(c2.problem_solving == c.problem_solving);
  CHECK(c2.judge_id == c.judge_id);
}

TEST_CASE("aggregate_scorecards: single card has zero spread") {
  std::vector<JudgeScorecard> cards = {{"m", 7.0, 8.0, 9.0, 6.0, 5.0, "j1"}};
  auto rows = eval::aggregate_scorecards(cards);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].model_id == "m");
  CHECK(rows[0].cards == 1);
  CHECK(rows[0].mean[0] == doctest::Approx(7.0));
  CHECK(rows[0].mean[4] == doctest::Approx(5.0));
  for (double s : rows[0].stddev) CHECK(s == doctest::Approx(0.0));
}

TEST_CASE("aggregate_scorecards: mean 4.5, population std 0.5 for scores 4 and 5") {
  std::vector<JudgeScorecard> cards = {{"m", 4, 4, 4, 4, 4, "j1"}, {"m", 5, 5, 5, 5, 5, "j2"}};
  auto rows = eval::aggregate_scorecards(cards);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].cards == 2);
  for (int d = 0; d < 5; ++d) {
    CHECK(rows[0].mean[d] == doctest::Approx(4.5));
    CHECK(rows[0].stddev[d] == doctest::Approx(0.5));
  }
}

TEST_CASE("aggregate_scorecards: rows sorted by model id") {
  std::vector<JudgeScorecard> cards = {{"zeta", 1, 1, 1, 1, 1, "j"},
                                       {"alpha", 2, 2, 2, 2, 2, "j"},
                                       {"zeta", 3, 3, 3, 3, 3, "k"}};
  auto rows = eval::aggregate_scorecards(cards);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].model_id == "alpha");
  CHECK(rows[1].model_id == "zeta");
  CHECK(rows[1].cards == 2);
  CHECK(rows[1].mean[0] == doctest::Approx(2.0));
  CHECK(rows[1].stddev[0] == doctest::Approx(1.0));
}

TEST_CASE("aggregate_scorecards: validation") {
  CHECK_THROWS(eval::aggregate_scorecards({}));

  std::vector<JudgeScorecard> out_of_scale = {{"m", 11.0, 1, 1, 1, 1, "j"}};
  CHECK_THROWS(eval::aggregate_scorecards(out_of_scale));
  CHECK_NOTHROW(eval::aggregate_scorecards(out_of_scale, 0.0, 11.0));

  std::vector<JudgeScorecard> negative = {{"m", -0.5, 1, 1, 1, 1, "j"}};
  CHECK_THROWS(eval::aggregate_scorecards(negative));
}

TEST_CASE("format_aggregate_table mentions every model and dimension") {
  std::vector<JudgeScorecard> cards = {{"model-a", 4, 4, 4, 4, 4, "j1"},
                                       {"model-b", 5, 5, 5, 5, 5, "j1"}};
  auto rows = eval::aggregate_scorecards(cards);
  auto table = eval::format_aggregate_table(rows);
  CHECK(table.find("model-a") != std::string::npos);
  CHECK(table.find("model-b") != std::string::npos);
  for (const char* dim : eval::kScoreDimensions) {
    CHECK(table.find(dim) != std::string::npos);
  }
}
