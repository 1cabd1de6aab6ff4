#pragma once

// Shared plumbing for subcommands: layered settings (built-in default <
// config file < flag), atomic output files and the per-directory run manifest.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fleetcm/errors.hpp"

namespace fleetcm::cli {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir = ".";
  std::size_t threads = 1;
};

class Run {
 public:
  Run(std::string subcommand, GlobalOptions globals, std::vector<std::string> argv);

  // Flag value if given, else the config entry, else `fallback`. The chosen
  // value is recorded in the manifest.
  template <typename T>
  T setting(const std::string& key, const std::optional<T>& flag, T fallback) {
    T value = fallback;
    if (flag) {
      value = *flag;
    } else if (config_.contains(key)) {
      try {
        value = config_.at(key).get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cli", "config key '" + key + "': " + e.what());
      }
    }
    effective_[key] = value;
    return value;
  }

  // Raw config section (an empty object when absent).
  nlohmann::json section(const std::string& key) const;
  const nlohmann::json& config() const { return config_; }

  std::uint64_t seed(std::uint64_t fallback);
  std::size_t threads() const { return globals_.threads; }

  void input(const std::filesystem::path& path);
  std::filesystem::path output_path(const std::string& relative) const;
  // Atomic (temp file + rename) write below the output directory.
  void write(const std::string& relative, const std::string& content);
  void summary(const std::string& key, nlohmann::json value) { summary_[key] = std::move(value); }
  // Records an effective setting resolved outside setting().
  void resolved(const std::string& key, nlohmann::json value) { effective_[key] = std::move(value); }

  // Appends one line to <out-dir>/manifest.jsonl.
  void finish();

 private:
  std::string subcommand_;
  GlobalOptions globals_;
  std::vector<std::string> argv_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json effective_ = nlohmann::json::object();
  nlohmann::json summary_ = nlohmann::json::object();
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point clock_;
};

// Comma-separated list of numbers, e.g. "5,10,15".
std::vector<double> parse_number_list(const std::string& text);

}  // namespace fleetcm::cli
