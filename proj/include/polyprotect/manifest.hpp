#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyprotect/errors.hpp"
#include "polyprotect/rng.hpp"
#include "polyprotect/version.hpp"

namespace polyprotect {

/// FNV-1a over the file bytes, as a 16-digit hex string.
inline std::string digest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for digest: " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[16384];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(h));
  return hex;
}

inline std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

/// Reproducibility record written as `<artifact>.manifest.json` next to
/// every output artifact: tool version, timestamp, the command's config
/// snapshot and digests of the artifact and of every input file.
inline void write_manifest(const std::filesystem::path& artifact,
                           const std::string& command,
                           const std::string& config_snapshot,
                           const std::vector<std::filesystem::path>& inputs) {
  nlohmann::json doc;
  doc["tool"] = "polyprotect";
  doc["version"] = kVersion;
  doc["created_utc"] = utc_timestamp();
  doc["command"] = command;
  doc["config"] = config_snapshot;
  doc["artifact"] = artifact.string();
  doc["artifact_digest_fnv1a64"] = digest_file(artifact);
  doc["inputs"] = nlohmann::json::array();
  for (const auto& input : inputs) {
    doc["inputs"].push_back({{"path", input.string()},
                             {"digest_fnv1a64", digest_file(input)}});
  }
  const std::filesystem::path path = artifact.string() + ".manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failure: " + path.string());
}

}  // namespace polyprotect
