#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace flyhash::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

/// Record of one command invocation. Re-running `argv` from `cwd` with inputs
/// matching `inputs` reproduces every artifact in `artifacts` byte for byte.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string cwd;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::string>> inputs;     // path, digest
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, digest ("" = not reproducible)
  std::uint64_t seed = 0;
  std::string version;

  void add_input(const std::filesystem::path& p);
  void add_artifact(const std::filesystem::path& p, bool reproducible = true);
  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);
};

/// "<artifact>.manifest.json"
std::filesystem::path manifest_path_for(const std::filesystem::path& artifact);

}  // namespace flyhash::cli
