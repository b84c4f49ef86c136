#include "factrl/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "factrl/text.hpp"
#include "json.hpp"

namespace factrl::manifest {

using nlohmann::json;

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input for digest: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  char hex[20];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(text::fnv1a64(buf.str())));
  return std::string("fnv1a64:") + hex;
}

std::string iso8601_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const RunManifest& m, const std::string& path) {
  json j{{"artifact_version", m.artifact_version},
         {"seed", m.seed},
         {"config", json::parse(m.config_json)},
         {"inputs", m.input_digests},
         {"started_at", m.started_at},
         {"finished_at", m.finished_at}};
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest: " + tmp);
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

RunManifest read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json j = json::parse(in);
  RunManifest m;
  m.artifact_version = j.at("artifact_version").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config_json = j.at("config").dump();
  m.input_digests = j.at("inputs").get<std::map<std::string, std::string>>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  return m;
}

}  // namespace factrl::manifest
