#pragma once

#include <map>
#include <string>

#include "factrl/grpo.hpp"
#include "factrl/rewards.hpp"

namespace factrl::config {

// Flat key-value config text: `key = value` lines, '#' comments, blank
// lines ignored. Duplicate or malformed keys are errors.
std::map<std::string, std::string> parse_kv(const std::string& content);
std::map<std::string, std::string> parse_kv_file(const std::string& path);

struct RunSettings {
  grpo::TrainConfig train;
  rewards::RewardWeights weights;
};

// Applies recognized keys onto defaults; unknown keys are errors so typos
// fail loudly. Does not validate invariants; call validate() afterwards.
RunSettings settings_from_kv(const std::map<std::string, std::string>& kv);

// Resolved settings as a JSON object string (for the run manifest).
std::string settings_to_json(const RunSettings& s);

}  // namespace factrl::config
