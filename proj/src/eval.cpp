#include "factrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "factrl/text.hpp"
#include "json.hpp"

namespace factrl::eval {

using nlohmann::json;

std::string to_jsonl(const MetricsRecord& m) {
  json j{{"iteration", m.iteration},
         {"mean_r_final", m.mean_r_final},
         {"mean_r_ent", m.mean_r_ent},
         {"mean_r_log", m.mean_r_log},
         {"mean_r_fmt", m.mean_r_fmt},
         {"mean_r_rep", m.mean_r_rep},
         {"kl", m.kl},
         {"entity_precision", m.entity_precision},
         {"format_compliance", m.format_compliance},
         {"mean_repetition_ratio", m.mean_repetition_ratio}};
  return j.dump();
}

MetricsRecord metrics_from_jsonl(std::string_view line) {
  json j = json::parse(line);
  MetricsRecord m;
  m.iteration = j.at("iteration").get<int>();
  m.mean_r_final = j.at("mean_r_final").get<double>();
  m.mean_r_ent = j.at("mean_r_ent").get<double>();
  m.mean_r_log = j.at("mean_r_log").get<double>();
  m.mean_r_fmt = j.at("mean_r_fmt").get<double>();
  m.mean_r_rep = j.at("mean_r_rep").get<double>();
  m.kl = j.at("kl").get<double>();
  m.entity_precision = j.at("entity_precision").get<double>();
  m.format_compliance = j.at("format_compliance").get<double>();
  m.mean_repetition_ratio = j.at("mean_repetition_ratio").get<double>();
  return m;
}

double entity_precision(std::span<const ScoredOutput> outputs,
                        const std::vector<rewards::GazetteerEntry>& gazetteer) {
  std::size_t ce = 0, ie = 0;
  for (const auto& out : outputs) {
    auto report = rewards::match_entities(out.tokens, out.query_id, gazetteer);
    ce += report.ce;
    ie += report.ie;
  }
  if (ce + ie == 0) return 1.0;
  return static_cast<double>(ce) / static_cast<double>(ce + ie);
}

std::string to_jsonl(const JudgeScorecard& c) {
  json j{{"model_id", c.model_id},
         {"think", c.think},
         {"answer", c.answer},
         {"historical_accuracy", c.historical_accuracy},
         {"logical_reasoning", c.logical_reasoning},
         {"problem_solving", c.problem_solving},
         {"judge_id", c.judge_id}};
  return j.dump();
}

JudgeScorecard scorecard_from_jsonl(std::string_view line) {
  json j = json::parse(line);
  JudgeScorecard c;
  c.model_id = j.at("model_id").get<std::string>();
  c.think = j.at("think").get<double>();
  c.answer = j.at("answer").get<double>();
  c.historical_accuracy = j.at("historical_accuracy").get<double>();
  c.logical_reasoning = j.at("logical_reasoning").get<double>();
  c.problem_solving = j.at("problem_solving").get<double>();
  c.judge_id = j.at("judge_id").get<std::string>();
  return c;
}

std::vector<JudgeScorecard> load_scorecards(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scorecards file: " + path);
  std::vector<JudgeScorecard> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(scorecard_from_jsonl(line));
  }
  return out;
}

std::vector<ScoreAggregate> aggregate_scorecards(std::span<const JudgeScorecard> cards,
                                                 double scale_min, double scale_max) {
  if (cards.empty()) throw std::invalid_argument("no scorecards to aggregate");
  std::map<std::string, std::vector<const JudgeScorecard*>> by_model;
  for (const auto& c : cards) {
    const double vals[5] = {c.think, c.answer, c.historical_accuracy, c.logical_reasoning,
                            c.problem_solving};
    for (double v : vals) {
      if (v < scale_min || v > scale_max) {
        throw std::invalid_argument("scorecard for '" + c.model_id +
                                    "' has a score outside the configured scale");
      }
    }
    by_model[c.model_id].push_back(&c);
  }
  std::vector<ScoreAggregate> rows;
  for (const auto& [model, group] : by_model) {
    ScoreAggregate row;
    row.model_id = model;
    row.cards = group.size();
    for (int d = 0; d < 5; ++d) {
      auto dim = [&](const JudgeScorecard* c) {
        switch (d) {
          case 0: return c->think;
          case 1: return c->answer;
          case 2: return c->historical_accuracy;
          case 3: return c->logical_reasoning;
          default: return c->problem_solving;
        }
      };
      double sum = 0.0;
      for (const auto* c : group) sum += dim(c);
      row.mean[d] = sum / static_cast<double>(group.size());
      double var = 0.0;
      for (const auto* c : group) {
        double diff = dim(c) - row.mean[d];
        var += diff * diff;
      }
      row.stddev[d] = std::sqrt(var / static_cast<double>(group.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_jsonl(const ScoreAggregate& a) {
  json j{{"model_id", a.model_id}, {"cards", a.cards}};
  for (int d = 0; d < 5; ++d) {
    j[std::string(kScoreDimensions[d]) + "_mean"] = a.mean[d];
    j[std::string(kScoreDimensions[d]) + "_std"] = a.stddev[d];
  }
  return j.dump();
}

std::string format_aggregate_table(std::span<const ScoreAggregate> rows) {
  std::ostringstream os;
  std::size_t model_w = 8;
  for (const auto& r : rows) model_w = std::max(model_w, r.model_id.size());
  os << std::left;
  os.width(static_cast<std::streamsize>(model_w + 2));
  os << "model";
  for (const auto* dim : kScoreDimensions) {
    os.width(22);
    os << dim;
  }
  os << '\n';
  for (const auto& r : rows) {
    os.width(static_cast<std::streamsize>(model_w + 2));
    os << r.model_id;
    for (int d = 0; d < 5; ++d) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.3f +/- %.3f", r.mean[d], r.stddev[d]);
      os.width(22);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace factrl::eval
