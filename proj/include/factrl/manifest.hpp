#pragma once

#include <map>
#include <string>

namespace factrl::manifest {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Everything needed to reproduce a run bit-exactly: resolved config,
/// seed, digests of every input file, and timing.
struct RunManifest {
  std::string config_json;  // resolved config snapshot as a JSON object
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;  // path -> fnv1a64 hex
  std::string artifact_version = kArtifactVersion;
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;
};

std::string digest_file(const std::string& path);  // "fnv1a64:<hex>"
std::string iso8601_utc_now();

// Serializes and writes via a temp file + rename so readers never observe
// a partial manifest.
void write_atomic(const RunManifest& m, const std::string& path);
RunManifest read(const std::string& path);

}  // namespace factrl::manifest
