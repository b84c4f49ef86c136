// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 4-6 share the frozen 5-fact synthetic run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "factrl/corpus.hpp"
#include "factrl/eval.hpp"
#include "factrl/grpo.hpp"
#include "factrl/policy.hpp"
#include "factrl/rewards.hpp"
#include "factrl/text.hpp"
#include "support/entity_oracle.hpp"
#include "support/synthetic_task.hpp"

using namespace factrl;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

bool approx(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------- criterion 1

void reward_oracle_suite(Check& c) {
  rewards::RewardWeights w;

  // ER arithmetic
  rewards::EntityMatchReport rep;
  c.require(rewards::entity_reward(rep, w) == 0.0, "ER(0,0) != 0");
  rep.ce = 3;
  rep.ie = 1;
  c.require(rewards::entity_reward(rep, w) == 2.0, "ER(3,1) != 2.0");
  rewards::RewardWeights w2 = w;
  w2.w_c = 0.5;
  w2.w_i = 2.0;
  rep.ce = 2;
  rep.ie = 2;
  c.require(rewards::entity_reward(rep, w2) == -3.0, "ER(2,2;0.5,2) != -3.0");

  // RP n-gram counts
  std::vector<std::string> abab = {"a", "b", "a", "b", "a", "b"};
  c.require(approx(rewards::repetition_penalty(abab, 2, -1.0), -0.6, 1e-15),
            "RP(ababab,2) != -0.6");
  std::vector<std::string> copies(10, "x");
  c.require(approx(rewards::repetition_penalty(copies, 3, -1.0), -0.875, 1e-15),
            "RP(x*10,3) != -0.875");
  std::vector<std::string> distinct = {"a", "b", "c", "d"};
  c.require(rewards::repetition_penalty(distinct, 2, -1.0) == 0.0, "RP(distinct) != 0");

  // R_final weighted sum: components (2.0, 0.5, 1.0, -0.6) -> 0.98
  corpus::MarkerPair m;
  rewards::GazetteerEntry x;
  x.canonical = "X";
  x.aliases = {"X"};
  x.relevant_queries = {"q"};
  rewards::RewardWeights wf;
  wf.n = 1;
  std::vector<std::string> out = {m.begin, "X", "X", m.end, "a", "a", "a", "a", "a", "a"};
  auto half = [](std::span<const std::string>, const corpus::ContextWindow*) { return 0.5; };
  auto b = rewards::final_reward(out, "q", {x}, wf, m, half);
  c.require(approx(b.r_ent, 2.0, 1e-15) && approx(b.r_log, 0.5, 1e-15) &&
                approx(b.r_fmt, 1.0, 1e-15) && approx(b.r_rep, -0.6, 1e-15),
            "R_final components mismatch");
  c.require(approx(b.r_final, 0.98, 1e-12), "R_final != 0.98");

  // 200 randomized outputs over a 10-entry gazetteer vs the brute-force matcher
  std::vector<rewards::GazetteerEntry> gaz;
  const std::vector<std::vector<std::string>> alias_sets = {
      {"Yu", "Da Yu"},       {"Tang", "Cheng Tang"}, {"Ji Fa", "King Wu"},
      {"Ying Zheng", "Qin Shi Huang"}, {"Liu Bang", "Gaozu"}, {"Wang Mang"},
      {"Liu Xiu"},           {"Cao Pi"},             {"Sima Yan"},
      {"Yang Jian"}};
  for (std::size_t i = 0; i < alias_sets.size(); ++i) {
    rewards::GazetteerEntry e;
    e.canonical = alias_sets[i][0];
    e.aliases = alias_sets[i];
    e.relevant_queries = {"q" + std::to_string(i)};
    if (i % 3 == 0) e.required_context = {"dynasty"};
    gaz.push_back(std::move(e));
  }
  std::vector<std::string> pool = {"dynasty", "founded", "the", "a"};
  for (const auto& aliases : alias_sets) {
    for (const auto& alias : aliases) {
      for (const auto& tok : text::split_whitespace(alias)) pool.push_back(tok);
    }
  }
  std::mt19937_64 rng(314159);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> len(0, 14);
  std::uniform_int_distribution<int> qi(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> output;
    int n = len(rng);
    for (int k = 0; k < n; ++k) output.push_back(pool[pick(rng)]);
    std::string query = "q" + std::to_string(qi(rng));

    auto got = rewards::match_entities(output, query, gaz);
    auto ref = oracle::match(output, query, gaz);
    std::sort(ref.correct.begin(), ref.correct.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    std::sort(ref.incorrect.begin(), ref.incorrect.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    bool same = got.ce == ref.correct.size() && got.ie == ref.incorrect.size();
    for (std::size_t k = 0; same && k < got.correct.size(); ++k) {
      same = got.correct[k].entry == ref.correct[k].first &&
             got.correct[k].span.start == ref.correct[k].second;
    }
    for (std::size_t k = 0; same && k < got.incorrect.size(); ++k) {
      same = got.incorrect[k].surface == ref.incorrect[k].first &&
             got.incorrect[k].span.start == ref.incorrect[k].second;
    }
    c.require(same, "matcher disagrees with oracle at trial " + std::to_string(trial));
    if (!c.ok) return;
  }
}

// ---------------------------------------------------------------- criterion 2

grpo::RolloutGroup ratio_group(const policy::PolicyParams& params, std::vector<double> ratios,
                               std::vector<double> advantages) {
  grpo::RolloutGroup g;
  const double lp = -std::log(static_cast<double>(params.vocab.size()));
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    g.outputs.push_back({i % 2 == 0 ? "A" : "B"});
    g.old_logprobs.push_back({lp - std::log(ratios[i])});
    g.advantages.push_back({advantages[i]});
  }
  return g;
}

grpo::RolloutGroup random_group(const policy::PolicyParams& current, std::mt19937_64& rng,
                                int G, int max_len) {
  policy::PolicyParams old = current;
  std::uniform_real_distribution<double> noise(-0.3, 0.3);
  for (double& x : old.logits) x += noise(rng);
  grpo::RolloutGroup g;
  g.prompt = {"A"};
  std::uniform_real_distribution<double> adv(-2.0, 2.0);
  for (int i = 0; i < G; ++i) {
    auto s = policy::sample_sequence(old, g.prompt, max_len, rng);
    g.advantages.emplace_back(s.tokens.size(), adv(rng));
    g.outputs.push_back(std::move(s.tokens));
    g.old_logprobs.push_back(std::move(s.logprobs));
  }
  return g;
}

void grpo_math_suite(Check& c) {
  c.require(grpo::clip_ratio(1.0, 0.2) == 1.0, "clip(1.0) != 1.0");
  c.require(grpo::clip_ratio(1.5, 0.2) == 1.2, "clip(1.5) != 1.2");
  c.require(grpo::clip_ratio(0.5, 0.2) == 0.5, "clip(0.5) != 0.5");

  std::vector<double> r = {2.0, 4.0, 6.0};
  auto a = grpo::compute_advantages(r);
  c.require(approx(a[0], -1.2247, 1e-4) && approx(a[1], 0.0, 1e-4) &&
                approx(a[2], 1.2247, 1e-4),
            "advantages([2,4,6]) off");

  policy::Vocabulary v({policy::kPadToken, policy::kEosToken, "A", "B"});
  policy::PolicyParams uniform{v};
  grpo::TrainConfig cfg;
  auto g0 = ratio_group(uniform, {1.0, 1.0}, {-1.0, 1.0});
  c.require(approx(grpo::surrogate(g0, uniform, cfg), 0.0, 1e-12), "surrogate case 1 != 0");
  auto g1 = ratio_group(uniform, {1.5, 1.0}, {1.0, -1.0});
  c.require(approx(grpo::surrogate(g1, uniform, cfg), 0.05, 1e-12),
            "surrogate case 2 != 0.05");

  c.require(grpo::kl_term(uniform, uniform, g0) == 0.0, "kl(params=ref) != 0");

  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    policy::PolicyParams theta{v};
    policy::PolicyParams ref{v};
    for (double& x : theta.logits) x = u(rng);
    for (double& x : ref.logits) x = u(rng);
    auto g = random_group(theta, rng, 3, 4);
    if (grpo::kl_term(theta, ref, g) < 0.0) {
      c.require(false, "negative kl at trial " + std::to_string(trial));
      return;
    }
  }
}

// ---------------------------------------------------------------- criterion 3

void gradient_check(Check& c) {
  policy::Vocabulary v({policy::kPadToken, policy::kEosToken, "A", "B", "C"});
  std::mt19937_64 rng(1618);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-5;
  double max_rel = 0.0;

  int done = 0;
  while (done < 100) {
    policy::PolicyParams theta{v};
    policy::PolicyParams ref{v};
    for (double& x : theta.logits) x = u(rng);
    for (double& x : ref.logits) x = u(rng);
    auto g = random_group(theta, rng, 2, 3);

    grpo::TrainConfig cfg;
    cfg.G = 2;
    cfg.beta = (done % 2 == 0) ? 0.0 : 0.25;
    cfg.surrogate_mode = (done % 4 < 2) ? grpo::SurrogateMode::PaperLiteral
                                        : grpo::SurrogateMode::PPOStyle;

    // Resample instances with a ratio sitting on a clip kink, where the
    // objective is not differentiable and finite differences are undefined.
    bool kink = false;
    for (std::size_t i = 0; i < g.outputs.size() && !kink; ++i) {
      auto lp = policy::sequence_logprob(theta, g.prompt, g.outputs[i]);
      for (std::size_t t = 0; t < lp.size(); ++t) {
        double ratio = std::exp(lp[t] - g.old_logprobs[i][t]);
        if (std::abs(ratio - (1.0 + cfg.epsilon)) < 1e-3 ||
            std::abs(ratio - (1.0 - cfg.epsilon)) < 1e-3) {
          kink = true;
          break;
        }
      }
    }
    if (kink) continue;

    auto grad = grpo::objective_grad(g, theta, ref, cfg);
    std::uniform_int_distribution<std::size_t> pick(0, grad.size() - 1);
    for (int k = 0; k < 8; ++k) {
      std::size_t flat = pick(rng);
      double saved = theta.logits[flat];
      theta.logits[flat] = saved + h;
      double up = grpo::objective(g, theta, ref, cfg);
      theta.logits[flat] = saved - h;
      double dn = grpo::objective(g, theta, ref, cfg);
      theta.logits[flat] = saved;
      double fd = (up - dn) / (2 * h);
      double rel = std::abs(fd - grad[flat]) / std::max(1.0, std::abs(grad[flat]));
      max_rel = std::max(max_rel, rel);
    }
    ++done;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max relative error %.3e", max_rel);
  c.require(max_rel <= 1e-5, buf);
}

// ------------------------------------------------------------ criteria 4 to 6

struct DeskRun {
  synthetic::Task task;
  double p0 = 0.0;
  double p1 = 0.0;
  grpo::TrainResult result{policy::PolicyParams{policy::Vocabulary(
                               {policy::kPadToken, policy::kEosToken})},
                           {}};
  std::string metrics_bytes;
};

DeskRun desk_run() {
  DeskRun run{synthetic::make_task()};
  policy::PolicyParams init{run.task.vocab};
  run.p0 = synthetic::heldout_precision(run.task, init, 999);
  std::ostringstream metrics;
  run.result = grpo::train(run.task.config, run.task.train_prompts, run.task.gazetteer,
                           run.task.weights, init, [&](const eval::MetricsRecord& rec) {
                             metrics << eval::to_jsonl(rec) << '\n';
                           });
  run.metrics_bytes = metrics.str();
  run.p1 = synthetic::heldout_precision(run.task, run.result.params, 999);
  return run;
}

void desk_scale_rl(Check& c, const DeskRun& run) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "held-out precision %.3f -> %.3f", run.p0, run.p1);
  c.require(run.p1 - run.p0 >= 0.3, std::string("improvement < 0.3 (") + buf + ")");
  c.require(run.p1 >= 0.8, std::string("final precision < 0.8 (") + buf + ")");

  const auto& m = run.result.metrics;
  const int W = 25;
  const int n = static_cast<int>(m.size());
  auto ma = [&](int t) {
    double s = 0.0;
    for (int i = t - W + 1; i <= t; ++i) s += m[static_cast<std::size_t>(i)].mean_r_final;
    return s / W;
  };
  for (int t = std::max(n / 2, W - 1); t + 1 < n; ++t) {
    if (ma(t + 1) < ma(t)) {
      c.require(false, "moving average of mean_r_final dips at iteration " +
                           std::to_string(t + 1));
      return;
    }
  }
}

void ablation(Check& c, const DeskRun& full) {
  synthetic::Task task = synthetic::make_task();
  task.weights.w1 = 0.0;  // entity weight removed, remainder renormalized
  task.weights.w2 = task.weights.w3 = task.weights.w4 = 1.0 / 3.0;

  policy::PolicyParams init{task.vocab};
  auto result = grpo::train(task.config, task.train_prompts, task.gazetteer, task.weights,
                            init);
  double ablated = synthetic::heldout_precision(task, result.params, 999);
  char buf[96];
  std::snprintf(buf, sizeof buf, "ablated %.3f vs full %.3f", ablated, full.p1);
  c.require(full.p1 - ablated >= 0.2, buf);
}

void determinism(Check& c, const DeskRun& first) {
  auto second = desk_run();
  c.require(!first.metrics_bytes.empty(), "empty metrics stream");
  c.require(first.metrics_bytes == second.metrics_bytes,
            "same-seed runs produced different metrics.jsonl bytes");
}

// ---------------------------------------------------------------- criterion 7

void pipeline_roundtrip(Check& c) {
  const auto terminals = corpus::default_terminals();
  const std::vector<std::string> pieces = {"天", "下", "商", "周", "王", "a",  "bc", " ",
                                           "。", "！", "？", ".",  "!",  "?",  ";",  "，",
                                           "\n", "；"};
  std::mt19937_64 rng(8128);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> len(0, 200);
  for (int doc_i = 0; doc_i < 100; ++doc_i) {
    std::string doc;
    int n = len(rng);
    for (int k = 0; k < n; ++k) doc += pieces[pick(rng)];
    auto segs = corpus::segment(doc, "fuzz", terminals);
    std::string joined;
    for (const auto& s : segs) joined += s.text;
    if (joined != std::string(text::trim(doc))) {
      c.require(false, "segmentation round-trip failed on fuzz doc " + std::to_string(doc_i));
      return;
    }
  }

  // Synthesized CoT records validate; the three malformation classes do not.
  corpus::MarkerPair m;
  std::vector<corpus::CorpusSegment> segs = {
      {0, "一。", "d", corpus::SegmentClass::Unclassified},
      {1, "二。", "d", corpus::SegmentClass::Unclassified},
      {2, "三。", "d", corpus::SegmentClass::Unclassified}};
  for (const auto& w : corpus::build_windows(segs, 1)) {
    c.require(corpus::validate_cot(corpus::build_cot(w, m), m),
              "synthesized CoT record failed validation");
  }
  corpus::CoTRecord missing_end{"q", m.begin + "t", "a", {0}};
  corpus::CoTRecord dup_begin{"q", m.begin + m.begin + "t" + m.end, "a", {0}};
  corpus::CoTRecord empty_answer{"q", m.begin + "t" + m.end, "", {0}};
  c.require(!corpus::validate_cot(missing_end, m), "missing end accepted");
  c.require(!corpus::validate_cot(dup_begin, m), "duplicate begin accepted");
  c.require(!corpus::validate_cot(empty_answer, m), "empty answer accepted");
}

int report(int idx, const char* name, const Check& c, double seconds, double budget) {
  bool ok = c.ok && seconds < budget;
  std::printf("%s  [%d] %s (%.2f s)%s%s\n", ok ? "PASS" : "FAIL", idx, name, seconds,
              c.ok ? "" : ": ", c.ok ? "" : c.detail.c_str());
  if (c.ok && seconds >= budget) {
    std::printf("      exceeded the %.0f s budget\n", budget);
  }
  return ok ? 0 : 1;
}

template <typename F>
int timed(int idx, const char* name, double budget, F&& body) {
  Check c;
  auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.require(false, std::string("exception: ") + e.what());
  }
  double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report(idx, name, c, seconds, budget);
}

}  // namespace

int main() {
  int failures = 0;
  failures += timed(1, "reward oracle suite", 5.0, reward_oracle_suite);
  failures += timed(2, "GRPO math suite", 5.0, grpo_math_suite);
  failures += timed(3, "gradient check", 30.0, gradient_check);

  std::optional<DeskRun> run;
  failures += timed(4, "desk-scale RL reproduction", 120.0, [&](Check& c) {
    run = desk_run();
    desk_scale_rl(c, *run);
  });
  failures += timed(5, "ablation", 120.0, [&](Check& c) {
    c.require(run.has_value(), "desk run unavailable");
    if (run) ablation(c, *run);
  });
  failures += timed(6, "determinism", 120.0, [&](Check& c) {
    c.require(run.has_value(), "desk run unavailable");
    if (run) determinism(c, *run);
  });

  failures += timed(7, "pipeline round-trip", 30.0, pipeline_roundtrip);
  return failures == 0 ? 0 : 1;
}
