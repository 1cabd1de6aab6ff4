#pragma once

// A trained model together with the normalization it expects and a record of
// how it was produced. Serialized as a single JSON document.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fleetcm/data.hpp"
#include "fleetcm/model.hpp"

namespace fleetcm {

struct ModelBundle {
  std::string preset;  // "A1", "A2" or "custom"
  model::ArchitectureSpec arch;
  nn::ParameterSet params;
  data::NormalizationStats normalization;
  nlohmann::json training = nlohmann::json::object();  // seed, config, history, ...

  nlohmann::json to_json() const;
  // Throws DataError on malformed input and ConfigError if the parameters do
  // not fit the architecture.
  static ModelBundle from_json(const nlohmann::json& j);
};

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

// Normalizes `raw` with the bundle's statistics and predicts every row.
std::vector<model::GaussianPrediction> predict_dataset(const ModelBundle& bundle,
                                                       const data::TurbineDataset& raw,
                                                       std::size_t threads = 1);

// v_i = (y_i - mean_i) / stddev_i
std::vector<double> standardized_residuals(const std::vector<model::GaussianPrediction>& preds,
                                           const data::Vector& y);

// Writes `content` to a sibling temporary file and renames it over `path`,
// so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace fleetcm
