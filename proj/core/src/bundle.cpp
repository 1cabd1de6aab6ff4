#include "fleetcm/bundle.hpp"

#include <fstream>
#include <system_error>
#include <unistd.h>

#include "fleetcm/errors.hpp"

namespace fleetcm {

nlohmann::json ModelBundle::to_json() const {
  return {{"format", "fleetcm.bundle"},
          {"version", 1},
          {"preset", preset},
          {"model", model::parameters_to_json(arch, params)},
          {"normalization", normalization.to_json()},
          {"training", training}};
}

ModelBundle ModelBundle::from_json(const nlohmann::json& j) {
  ModelBundle b;
  try {
    if (j.value("format", "") != "fleetcm.bundle") {
      throw DataError("bundle", "not a fleetcm model bundle");
    }
    b.preset = j.value("preset", "custom");
    auto [arch, params] = model::parameters_from_json(j.at("model"));
    b.arch = std::move(arch);
    b.params = std::move(params);
    b.normalization = data::NormalizationStats::from_json(j.at("normalization"));
    b.training = j.value("training", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bundle", std::string("malformed bundle: ") + e.what());
  }
  if (b.normalization.output_width() != b.arch.d0) {
    throw ConfigError("bundle", "normalization yields " +
                                    std::to_string(b.normalization.output_width()) +
                                    " features but the model expects " + std::to_string(b.arch.d0));
  }
  return b;
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
  write_file_atomic(path, bundle.to_json().dump(1) + "\n");
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("bundle", "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bundle", path.string() + ": " + e.what());
  }
  return ModelBundle::from_json(j);
}

std::vector<model::GaussianPrediction> predict_dataset(const ModelBundle& bundle,
                                                       const data::TurbineDataset& raw,
                                                       std::size_t threads) {
  const data::TurbineDataset ds = data::apply_normalization(raw, bundle.normalization);
  return model::predict_batch(bundle.params, bundle.arch, ds.features, threads);
}

std::vector<double> standardized_residuals(const std::vector<model::GaussianPrediction>& preds,
                                           const data::Vector& y) {
  if (static_cast<data::Index>(preds.size()) != y.size()) {
    throw ShapeError("bundle", "predictions and targets differ in length");
  }
  std::vector<double> v(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!(preds[i].stddev > 0.0)) throw DomainError("bundle", "non-positive predictive stddev");
    v[i] = (y[static_cast<data::Index>(i)] - preds[i].mean) / preds[i].stddev;
  }
  return v;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("io", "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp, ec);
      throw DataError("io", "write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("io", "cannot move output into place: " + path.string());
  }
}

}  // namespace fleetcm
