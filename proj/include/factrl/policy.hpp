#pragma once

#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace factrl::policy {

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kEosToken = "<eos>";

/// Distinct tokens with a bijective index<->token mapping. Must contain the
/// pad and end-of-sequence tokens.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int index(const std::string& token) const;  // throws on unknown token
  bool contains(const std::string& token) const;
  const std::string& token(int idx) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  int pad() const { return pad_; }
  int eos() const { return eos_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int pad_ = -1;
  int eos_ = -1;
};

/// Order-2 autoregressive policy: a V*V*V logit table mapping the previous
/// two tokens to next-token logits.
struct PolicyParams {
  Vocabulary vocab;
  std::vector<double> logits;  // row-major [prev2][prev1][next]

  explicit PolicyParams(Vocabulary v);

  std::size_t row_offset(int prev2, int prev1) const;
  std::span<double> row(int prev2, int prev1);
  std::span<const double> row(int prev2, int prev1) const;
};

// Softmax of the context's logit row, computed with max-subtraction.
std::vector<double> next_distribution(const PolicyParams& params, int prev2, int prev1);
std::vector<double> next_distribution(const PolicyParams& params, const std::string& prev2,
                                      const std::string& prev1);

struct SampledSequence {
  std::vector<std::string> tokens;   // includes the eos token when emitted
  std::vector<double> logprobs;      // one per generated token
};

// Samples until eos or max_len tokens. Deterministic for a fixed generator
// state.
SampledSequence sample_sequence(const PolicyParams& params,
                                std::span<const std::string> prompt, int max_len,
                                std::mt19937_64& rng);

// Teacher-forced per-token log-probs of `output` after `prompt`.
std::vector<double> sequence_logprob(const PolicyParams& params,
                                     std::span<const std::string> prompt,
                                     std::span<const std::string> output);

/// Sparse gradient of log pi(o_t | ctx): one logit row, zero elsewhere.
struct LogprobGrad {
  std::size_t row_offset = 0;      // into PolicyParams::logits
  std::vector<double> row;         // onehot(o_t) - softmax(logits[ctx])
};

LogprobGrad logprob_grad(const PolicyParams& params, std::span<const std::string> prompt,
                         std::span<const std::string> output, std::size_t t);

// Context row indices (prev2, prev1) for each position of `output` given
// the left-padded prompt.
std::vector<std::pair<int, int>> context_trace(const Vocabulary& vocab,
                                               std::span<const std::string> prompt,
                                               std::span<const std::string> output);

// Checkpoint: a single JSON-Lines record holding vocabulary, shape header
// and the logit tensor. Round-trips bit-exactly.
void save_checkpoint(const PolicyParams& params, const std::string& path);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace factrl::policy
