#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "factrl/eval.hpp"
#include "factrl/policy.hpp"
#include "factrl/rewards.hpp"

namespace factrl::grpo {

/// G sampled outputs for one prompt, with rollout-time log-probs, component
/// rewards and per-token advantages.
struct RolloutGroup {
  std::vector<std::string> prompt;
  std::string query_id;
  std::vector<std::vector<std::string>> outputs;
  std::vector<std::vector<double>> old_logprobs;
  std::vector<rewards::RewardBreakdown> breakdowns;
  std::vector<std::vector<double>> advantages;
};

enum class SurrogateMode { PaperLiteral, PPOStyle };
enum class NormalizationMode { PaperGlobal, PerOutput };

SurrogateMode surrogate_mode_from_string(std::string_view s);
NormalizationMode normalization_mode_from_string(std::string_view s);
std::string to_string(SurrogateMode m);
std::string to_string(NormalizationMode m);

struct TrainConfig {
  int G = 8;
  double epsilon = 0.2;
  double beta = 0.04;
  double learning_rate = 0.5;
  int iterations = 100;
  int prompts_per_iter = 1;
  int max_len = 32;
  std::uint64_t seed = 0;
  SurrogateMode surrogate_mode = SurrogateMode::PaperLiteral;
  NormalizationMode normalization_mode = NormalizationMode::PaperGlobal;
  int threads = 1;

  void validate() const;
};

// Group-standardized scalar advantages: (R_i - mean) / (std_pop + 1e-8),
// all zero when the population std is exactly 0.
std::vector<double> compute_advantages(std::span<const double> rewards);

// M(r) = min(r, clamp(r, 1-eps, 1+eps)): identity on (0, 1+eps], capped at
// 1+eps above the band.
double clip_ratio(double r, double epsilon);

// Clipped importance-weighted surrogate over the group.
double surrogate(const RolloutGroup& group, const policy::PolicyParams& params,
                 const TrainConfig& config);

// Mean over sampled tokens of rho - ln(rho) - 1 with
// rho = pi_ref(o_t|ctx) / pi_theta(o_t|ctx). Always >= 0.
double kl_term(const policy::PolicyParams& params, const policy::PolicyParams& ref,
               const RolloutGroup& group);

// surrogate - beta * kl_term; the update step ascends this.
double objective(const RolloutGroup& group, const policy::PolicyParams& params,
                 const policy::PolicyParams& ref, const TrainConfig& config);

// Analytic gradient of `objective` with respect to the full logit tensor.
std::vector<double> objective_grad(const RolloutGroup& group,
                                   const policy::PolicyParams& params,
                                   const policy::PolicyParams& ref,
                                   const TrainConfig& config);

struct Prompt {
  std::vector<std::string> tokens;
  std::string query_id;
};

std::vector<Prompt> load_prompts(const std::string& path);
std::string to_jsonl(const Prompt& p);

// Samples G outputs from `sampler_params` and scores them; advantages come
// from the standardized final rewards, broadcast over tokens.
RolloutGroup rollout(const policy::PolicyParams& sampler_params, const Prompt& prompt,
                     int G, int max_len, std::uint64_t seed,
                     const std::vector<rewards::GazetteerEntry>& gazetteer,
                     const rewards::RewardWeights& weights,
                     const corpus::MarkerPair& markers,
                     const rewards::CoherenceScorer& scorer);

struct TrainResult {
  policy::PolicyParams params;
  std::vector<eval::MetricsRecord> metrics;
};

using MetricsSink = std::function<void(const eval::MetricsRecord&)>;

// One clipped-surrogate gradient-ascent step per iteration against a frozen
// snapshot pi_old, KL-regularized toward the initial reference policy.
// Deterministic for a fixed seed at any thread count.
TrainResult train(const TrainConfig& config, std::span<const Prompt> prompts,
                  const std::vector<rewards::GazetteerEntry>& gazetteer,
                  const rewards::RewardWeights& weights, const policy::PolicyParams& init,
                  const MetricsSink& sink = nullptr);

}  // namespace factrl::grpo
