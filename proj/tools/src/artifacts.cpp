#include "artifacts.hpp"

#include <fstream>

#include "fleetcm/bundle.hpp"
#include "fleetcm/csv.hpp"
#include "fleetcm/time.hpp"
#include "fleetcm/version.hpp"

namespace fleetcm::cli {

namespace fs = std::filesystem;

Run::Run(std::string subcommand, GlobalOptions globals, std::vector<std::string> argv)
    : subcommand_(std::move(subcommand)),
      globals_(std::move(globals)),
      argv_(std::move(argv)),
      started_(std::chrono::system_clock::now()),
      clock_(std::chrono::steady_clock::now()) {
  if (globals_.threads == 0) throw ConfigError("cli", "--threads must be at least 1");
  if (!globals_.config_path.empty()) {
    std::ifstream in(globals_.config_path);
    if (!in) throw ConfigError("cli", "cannot open config file " + globals_.config_path);
    try {
      in >> config_;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cli", globals_.config_path + ": " + e.what());
    }
    if (!config_.is_object()) {
      throw ConfigError("cli", globals_.config_path + ": top level must be a JSON object");
    }
  }
}

nlohmann::json Run::section(const std::string& key) const {
  if (!config_.contains(key)) return nlohmann::json::object();
  const auto& s = config_.at(key);
  if (!s.is_object()) throw ConfigError("cli", "config key '" + key + "' must be an object");
  return s;
}

std::uint64_t Run::seed(std::uint64_t fallback) {
  return setting<std::uint64_t>("seed", globals_.seed, fallback);
}

void Run::input(const fs::path& path) { inputs_.push_back(path.string()); }

fs::path Run::output_path(const std::string& relative) const {
  const fs::path rel(relative);
  if (rel.is_absolute() || rel.lexically_normal().string().starts_with("..")) {
    throw ConfigError("cli", "output '" + relative + "' escapes the output directory");
  }
  return fs::path(globals_.out_dir) / rel;
}

void Run::write(const std::string& relative, const std::string& content) {
  const fs::path path = output_path(relative);
  write_file_atomic(path, content);
  outputs_.push_back(path.string());
}

void Run::finish() {
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();
  nlohmann::json line = {
      {"subcommand", subcommand_},
      {"version", kVersion},
      {"argv", argv_},
      {"config_path", globals_.config_path.empty() ? nlohmann::json(nullptr)
                                                   : nlohmann::json(globals_.config_path)},
      {"config", config_},
      {"settings", effective_},
      {"threads", globals_.threads},
      {"inputs", inputs_},
      {"outputs", outputs_},
      {"started", format_timestamp(std::chrono::floor<std::chrono::seconds>(started_))},
      {"wall_seconds", wall},
      {"summary", summary_}};
  const fs::path manifest = fs::path(globals_.out_dir) / "manifest.jsonl";
  fs::create_directories(globals_.out_dir);
  std::ofstream out(manifest, std::ios::app);
  if (!out) throw DataError("cli", "cannot append to " + manifest.string());
  out << line.dump() << '\n';
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> values;
  for (const auto& field : csv::split_line(text)) {
    std::optional<double> v;
    try {
      v = csv::parse_number(field);
    } catch (const DataError&) {
    }
    if (!v) throw ConfigError("cli", "bad entry '" + field + "' in list '" + text + "'");
    values.push_back(*v);
  }
  if (values.empty()) throw ConfigError("cli", "empty list");
  return values;
}

}  // namespace fleetcm::cli
