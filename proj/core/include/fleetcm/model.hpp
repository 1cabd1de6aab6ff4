#pragma once

// The branching probabilistic MLP: a shared ReLU trunk followed by separate
// mean and standard-deviation paths. The mean head is linear; the stddev head
// goes through softplus(., delta) so stddev >= delta everywhere.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fleetcm/nn.hpp"

namespace fleetcm::model {

using nn::Index;
using nn::Matrix;
using nn::Vector;

struct ArchitectureSpec {
  Index d0 = 0;
  std::vector<Index> trunk_widths;
  std::vector<Index> mu_widths;     // hidden widths after the branch point
  std::vector<Index> sigma_widths;  // hidden widths after the branch point
  double delta = 0.001;
  // Fixed output affine, not trained: mean = offset + scale * head_mu and
  // stddev = scale * softplus(head_sigma) + delta, so both stay in kW while the
  // network itself works on unit-scale targets.
  double target_offset = 0.0;
  double target_scale = 1.0;

  // Throws ConfigError on an empty trunk or non-positive widths.
  void validate() const;
  // Layer widths and delta agree; the output affine is ignored.
  bool same_structure(const ArchitectureSpec& other) const;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

// Shared trunk 100-80-40, one 20-unit hidden layer per branch.
ArchitectureSpec preset_a1(Index d0 = 41);
// Shared trunk 300-200-100, heads attached directly.
ArchitectureSpec preset_a2(Index d0 = 41);
// "A1" / "A2"; std::nullopt for anything else.
std::optional<ArchitectureSpec> preset(const std::string& name, Index d0 = 41);

// Closed-form count: sum over instantiated layers of d_in*d_out + d_out.
Index parameter_count(const ArchitectureSpec& arch);

struct GaussianPrediction {
  double mean = 0.0;    // kW
  double stddev = 1.0;  // kW
};

// Allocates and He-uniform initializes all layers (biases zero).
nn::ParameterSet build(const ArchitectureSpec& arch, std::uint64_t seed);

// Same shapes as build() with every parameter set to zero.
nn::ParameterSet zeros(const ArchitectureSpec& arch);

// Throws ConfigError("arch mismatch ...") if `params` was not built for `arch`.
void check_matches(const nn::ParameterSet& params, const ArchitectureSpec& arch);

GaussianPrediction predict(const nn::ParameterSet& params, const ArchitectureSpec& arch,
                           const Eigen::Ref<const Vector>& x);

// Rows of `x` are samples (n x d0). Rows are processed in fixed chunks that
// are spread over up to `threads` worker threads; the result does not depend
// on the thread count.
std::vector<GaussianPrediction> predict_batch(const nn::ParameterSet& params,
                                              const ArchitectureSpec& arch,
                                              const Eigen::Ref<const Matrix>& x,
                                              std::size_t threads = 1);

// Sum of per-row Gaussian negative log-likelihoods. Rows of `x` are samples.
double batch_nll(const nn::ParameterSet& params, const ArchitectureSpec& arch,
                 const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y);

// JSON: {"format": "fleetcm.parameters", "version": 1, "arch": {...},
//        "flat_params": ["<shortest round-trip decimal>", ...]}
nlohmann::json arch_to_json(const ArchitectureSpec& arch);
ArchitectureSpec arch_from_json(const nlohmann::json& j);
nlohmann::json parameters_to_json(const ArchitectureSpec& arch, const nn::ParameterSet& params);
// Returns the architecture stored in the document together with its parameters.
std::pair<ArchitectureSpec, nn::ParameterSet> parameters_from_json(const nlohmann::json& j);

}  // namespace fleetcm::model
