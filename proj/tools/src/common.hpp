#pragma once

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include "artifacts.hpp"
#include "fleetcm/data.hpp"

namespace fleetcm::cli {

// A path-valued setting that must be present.
inline std::string required_path(Run& run, const std::string& key,
                                 const std::optional<std::string>& flag) {
  std::string value = run.setting<std::string>(key, flag, "");
  if (value.empty()) throw ConfigError("cli", "missing --" + key);
  return value;
}

inline data::ScadaSchema load_schema(Run& run, const std::optional<std::string>& flag) {
  const std::string path = run.setting<std::string>("schema", flag, "");
  if (path.empty()) return data::ScadaSchema::default_set();
  run.input(path);
  return data::ScadaSchema::load(path);
}

inline data::TurbineDataset read_input(Run& run, const std::filesystem::path& path,
                                       const data::ScadaSchema& schema,
                                       const std::string& unit = "") {
  run.input(path);
  return data::load_dataset(path, schema, unit);
}

template <typename Writer>
std::string render(Writer&& writer) {
  std::ostringstream out;
  writer(out);
  return out.str();
}

}  // namespace fleetcm::cli
