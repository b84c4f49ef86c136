#include "factrl/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "factrl/text.hpp"
#include "json.hpp"

namespace factrl::config {

using nlohmann::json;

std::map<std::string, std::string> parse_kv(const std::string& content) {
  std::map<std::string, std::string> kv;
  std::istringstream in(content);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string_view sv = text::trim(line);
    if (sv.empty()) continue;
    auto eq = sv.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    std::string key{text::trim(sv.substr(0, eq))};
    std::string value{text::trim(sv.substr(eq + 1))};
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key or value");
    }
    if (!kv.emplace(key, value).second) {
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    }
  }
  return kv;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kv(buf.str());
}

namespace {

double as_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = std::stod(value, &used);
  if (used != value.size()) {
    throw std::invalid_argument("config key '" + key + "': not a number: " + value);
  }
  return v;
}

long long as_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = std::stoll(value, &used);
  if (used != value.size()) {
    throw std::invalid_argument("config key '" + key + "': not an integer: " + value);
  }
  return v;
}

}  // namespace

RunSettings settings_from_kv(const std::map<std::string, std::string>& kv) {
  RunSettings s;
  for (const auto& [key, value] : kv) {
    if (key == "G") s.train.G = static_cast<int>(as_int(key, value));
    else if (key == "epsilon") s.train.epsilon = s.weights.epsilon = as_double(key, value);
    else if (key == "beta") s.train.beta = s.weights.beta = as_double(key, value);
    else if (key == "learning_rate") s.train.learning_rate = as_double(key, value);
    else if (key == "iterations") s.train.iterations = static_cast<int>(as_int(key, value));
    else if (key == "prompts_per_iter") s.train.prompts_per_iter = static_cast<int>(as_int(key, value));
    else if (key == "max_len") s.train.max_len = static_cast<int>(as_int(key, value));
    else if (key == "seed") s.train.seed = static_cast<std::uint64_t>(as_int(key, value));
    else if (key == "threads") s.train.threads = static_cast<int>(as_int(key, value));
    else if (key == "surrogate_mode") s.train.surrogate_mode = grpo::surrogate_mode_from_string(value);
    else if (key == "normalization_mode")
      s.train.normalization_mode = grpo::normalization_mode_from_string(value);
    else if (key == "w_c") s.weights.w_c = as_double(key, value);
    else if (key == "w_i") s.weights.w_i = as_double(key, value);
    else if (key == "w1") s.weights.w1 = as_double(key, value);
    else if (key == "w2") s.weights.w2 = as_double(key, value);
    else if (key == "w3") s.weights.w3 = as_double(key, value);
    else if (key == "w4") s.weights.w4 = as_double(key, value);
    else if (key == "mpv") s.weights.mpv = as_double(key, value);
    else if (key == "n") s.weights.n = static_cast<int>(as_int(key, value));
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return s;
}

std::string settings_to_json(const RunSettings& s) {
  json j{{"G", s.train.G},
         {"epsilon", s.train.epsilon},
         {"beta", s.train.beta},
         {"learning_rate", s.train.learning_rate},
         {"iterations", s.train.iterations},
         {"prompts_per_iter", s.train.prompts_per_iter},
         {"max_len", s.train.max_len},
         {"seed", s.train.seed},
         {"threads", s.train.threads},
         {"surrogate_mode", grpo::to_string(s.train.surrogate_mode)},
         {"normalization_mode", grpo::to_string(s.train.normalization_mode)},
         {"w_c", s.weights.w_c},
         {"w_i", s.weights.w_i},
         {"w1", s.weights.w1},
         {"w2", s.weights.w2},
         {"w3", s.weights.w3},
         {"w4", s.weights.w4},
         {"mpv", s.weights.mpv},
         {"n", s.weights.n}};
  return j.dump();
}

}  // namespace factrl::config
