#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>

namespace densctl {

/// Git blob id: SHA-1 of "blob <size>\0" followed by the bytes, lowercase hex.
std::string content_hash(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

struct ArtifactRef {
  /// Relative to the manifest's base directory when the file lives under it.
  std::string path;
  std::string sha1;
  std::uintmax_t bytes = 0;

  bool operator==(const ArtifactRef&) const = default;
};

/// Record of one stage run. Everything except `timestamps` is a pure function
/// of the inputs, config and seed.
struct RunManifest {
  static constexpr int kFormat = 1;

  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, ArtifactRef> inputs;
  std::map<std::string, ArtifactRef> outputs;
  nlohmann::json metrics = nlohmann::json::object();
  /// Wall-clock fields (created_utc, elapsed_seconds); ignored by same_run.
  nlohmann::json timestamps = nlohmann::json::object();

  void add_input(const std::string& role, const std::filesystem::path& file, const std::filesystem::path& base);
  void add_output(const std::string& role, const std::filesystem::path& file, const std::filesystem::path& base);

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);

  bool same_run(const RunManifest& other) const;
};

/// Current UTC time as ISO-8601 with a trailing Z.
std::string utc_now();

}  // namespace densctl
