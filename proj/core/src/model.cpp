#include "fleetcm/model.hpp"

#include <charconv>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include "fleetcm/errors.hpp"

namespace fleetcm::model {

namespace {

constexpr int kParameterFormatVersion = 1;

std::string to_decimal(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double from_decimal(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("model", "bad parameter value '" + s + "'");
  }
  return v;
}

std::vector<nn::DenseLayer> make_chain(Index d_in, const std::vector<Index>& widths) {
  std::vector<nn::DenseLayer> layers;
  for (Index w : widths) {
    layers.push_back(nn::DenseLayer::zeros(d_in, w));
    d_in = w;
  }
  return layers;
}

}  // namespace

void ArchitectureSpec::validate() const {
  if (d0 <= 0) {
    throw ConfigError("model", "input width d0 must be positive");
  }
  if (trunk_widths.empty()) {
    throw ConfigError("model", "architecture needs at least one shared trunk layer");
  }
  for (const auto* widths : {&trunk_widths, &mu_widths, &sigma_widths}) {
    for (Index w : *widths) {
      if (w <= 0) throw ConfigError("model", "layer widths must be positive");
    }
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw ConfigError("model", "softplus shift delta must be a finite non-negative number");
  }
  if (!std::isfinite(target_offset) || !(target_scale > 0.0) || !std::isfinite(target_scale)) {
    throw ConfigError("model", "output scale must be positive and finite");
  }
}

bool ArchitectureSpec::same_structure(const ArchitectureSpec& other) const {
  return d0 == other.d0 && trunk_widths == other.trunk_widths && mu_widths == other.mu_widths &&
         sigma_widths == other.sigma_widths && delta == other.delta;
}

ArchitectureSpec preset_a1(Index d0) {
  return ArchitectureSpec{d0, {100, 80, 40}, {20}, {20}, 0.001};
}

ArchitectureSpec preset_a2(Index d0) {
  return ArchitectureSpec{d0, {300, 200, 100}, {}, {}, 0.001};
}

std::optional<ArchitectureSpec> preset(const std::string& name, Index d0) {
  if (name == "A1" || name == "a1") return preset_a1(d0);
  if (name == "A2" || name == "a2") return preset_a2(d0);
  return std::nullopt;
}

Index parameter_count(const ArchitectureSpec& arch) {
  arch.validate();
  Index total = 0;
  Index d_in = arch.d0;
  for (Index w : arch.trunk_widths) {
    total += d_in * w + w;
    d_in = w;
  }
  const Index branch_in = d_in;
  for (const auto* widths : {&arch.mu_widths, &arch.sigma_widths}) {
    Index prev = branch_in;
    for (Index w : *widths) {
      total += prev * w + w;
      prev = w;
    }
    total += prev + 1;  // 1-unit head
  }
  return total;
}

nn::ParameterSet zeros(const ArchitectureSpec& arch) {
  arch.validate();
  nn::ParameterSet p;
  p.trunk = make_chain(arch.d0, arch.trunk_widths);
  const Index branch_in = arch.trunk_widths.back();
  std::vector<Index> mu = arch.mu_widths;
  mu.push_back(1);
  std::vector<Index> sigma = arch.sigma_widths;
  sigma.push_back(1);
  p.mu = make_chain(branch_in, mu);
  p.sigma = make_chain(branch_in, sigma);
  return p;
}

nn::ParameterSet build(const ArchitectureSpec& arch, std::uint64_t seed) {
  nn::ParameterSet p = zeros(arch);
  std::mt19937_64 rng(seed);
  for (auto* layers : {&p.trunk, &p.mu, &p.sigma}) {
    for (auto& layer : *layers) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.d_in()));
      std::uniform_real_distribution<double> dist(-limit, limit);
      // Column-major fill, matching the flat order.
      for (Index c = 0; c < layer.weights.cols(); ++c) {
        for (Index r = 0; r < layer.weights.rows(); ++r) {
          layer.weights(r, c) = dist(rng);
        }
      }
    }
  }
  return p;
}

void check_matches(const nn::ParameterSet& params, const ArchitectureSpec& arch) {
  if (!params.same_shape(zeros(arch))) {
    throw ConfigError("model", "arch mismatch: parameters do not fit the requested architecture");
  }
}

GaussianPrediction predict(const nn::ParameterSet& params, const ArchitectureSpec& arch,
                           const Eigen::Ref<const Vector>& x) {
  if (x.size() != arch.d0) {
    throw ShapeError("model", "predict: input length " + std::to_string(x.size()) +
                                  " != d0 " + std::to_string(arch.d0));
  }
  const nn::BatchOutput out = nn::forward(params, arch.delta / arch.target_scale, x);
  return {arch.target_offset + arch.target_scale * out.mean[0], arch.target_scale * out.stddev[0]};
}

std::vector<GaussianPrediction> predict_batch(const nn::ParameterSet& params,
                                              const ArchitectureSpec& arch,
                                              const Eigen::Ref<const Matrix>& x,
                                              std::size_t threads) {
  if (x.cols() != arch.d0) {
    throw ShapeError("model", "predict: feature width " + std::to_string(x.cols()) +
                                  " != d0 " + std::to_string(arch.d0));
  }
  std::vector<GaussianPrediction> out(static_cast<std::size_t>(x.rows()));
  constexpr Index kChunk = 2048;
  const Index n_chunks = (x.rows() + kChunk - 1) / kChunk;
  const double inner_delta = arch.delta / arch.target_scale;
  auto run_chunk = [&](Index chunk) {
    const Index start = chunk * kChunk;
    const Index len = std::min(kChunk, x.rows() - start);
    const Matrix cols = x.middleRows(start, len).transpose();
    const nn::BatchOutput b = nn::forward(params, inner_delta, cols);
    for (Index i = 0; i < len; ++i) {
      out[static_cast<std::size_t>(start + i)] = {
          arch.target_offset + arch.target_scale * b.mean[i], arch.target_scale * b.stddev[i]};
    }
  };
  const auto workers = static_cast<Index>(std::min<std::size_t>(
      std::max<std::size_t>(threads, 1), static_cast<std::size_t>(std::max<Index>(n_chunks, 1))));
  if (workers <= 1) {
    for (Index c = 0; c < n_chunks; ++c) run_chunk(c);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index c = w; c < n_chunks; c += workers) run_chunk(c);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double batch_nll(const nn::ParameterSet& params, const ArchitectureSpec& arch,
                 const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y) {
  if (x.rows() != y.size()) {
    throw ShapeError("model", "batch_nll: " + std::to_string(x.rows()) + " rows but " +
                                  std::to_string(y.size()) + " targets");
  }
  const auto preds = predict_batch(params, arch, x);
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    total += nn::nll_gaussian(y[static_cast<Index>(i)], preds[i].mean, preds[i].stddev);
  }
  return total;
}

nlohmann::json arch_to_json(const ArchitectureSpec& arch) {
  return {{"d0", arch.d0},
          {"trunk_widths", arch.trunk_widths},
          {"mu_widths", arch.mu_widths},
          {"sigma_widths", arch.sigma_widths},
          {"delta", arch.delta},
          {"target_offset", arch.target_offset},
          {"target_scale", arch.target_scale}};
}

ArchitectureSpec arch_from_json(const nlohmann::json& j) {
  try {
    ArchitectureSpec a;
    a.d0 = j.at("d0").get<Index>();
    a.trunk_widths = j.at("trunk_widths").get<std::vector<Index>>();
    a.mu_widths = j.value("mu_widths", std::vector<Index>{});
    a.sigma_widths = j.value("sigma_widths", std::vector<Index>{});
    a.delta = j.value("delta", 0.001);
    a.target_offset = j.value("target_offset", 0.0);
    a.target_scale = j.value("target_scale", 1.0);
    a.validate();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model", std::string("bad architecture document: ") + e.what());
  }
}

nlohmann::json parameters_to_json(const ArchitectureSpec& arch, const nn::ParameterSet& params) {
  check_matches(params, arch);
  const Vector flat = params.flatten();
  nlohmann::json values = nlohmann::json::array();
  for (Index i = 0; i < flat.size(); ++i) values.push_back(to_decimal(flat[i]));
  return {{"format", "fleetcm.parameters"},
          {"version", kParameterFormatVersion},
          {"arch", arch_to_json(arch)},
          {"flat_params", std::move(values)}};
}

std::pair<ArchitectureSpec, nn::ParameterSet> parameters_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "fleetcm.parameters") {
    throw DataError("model", "not a parameter document");
  }
  if (j.value("version", 0) != kParameterFormatVersion) {
    throw DataError("model", "unsupported parameter format version");
  }
  ArchitectureSpec arch = arch_from_json(j.at("arch"));
  nn::ParameterSet params = zeros(arch);
  const auto& values = j.at("flat_params");
  if (static_cast<Index>(values.size()) != params.flat_size()) {
    throw DataError("model", "parameter count " + std::to_string(values.size()) +
                                 " does not match architecture (" +
                                 std::to_string(params.flat_size()) + ")");
  }
  Vector flat(params.flat_size());
  for (Index i = 0; i < flat.size(); ++i) {
    flat[i] = from_decimal(values[static_cast<std::size_t>(i)].get<std::string>());
  }
  params.assign_flat(flat);
  return {std::move(arch), std::move(params)};
}

}  // namespace fleetcm::model
