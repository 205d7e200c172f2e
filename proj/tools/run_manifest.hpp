#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lbrkit {

/// Lowercase hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

/// Writes `contents` to `path` via a temporary sibling and rename.
void write_atomically(const std::filesystem::path& path, const std::string& contents);

/// Provenance record written next to every output artifact as `<artifact>.run.json`.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

  /// Writes one manifest per registered output.
  void finish() const;

 private:
  std::string subcommand_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  std::vector<std::filesystem::path> outputs_;
  std::chrono::steady_clock::time_point started_;
};

}  // namespace lbrkit
