#pragma once

// Dense-layer primitives, activations, analytic backpropagation through the
// branching network and the Adam optimizer. Everything is 64-bit.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace fleetcm::nn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Affine map x -> W x + b with W of shape (d_out x d_in).
struct DenseLayer {
  Matrix weights;
  Vector bias;

  DenseLayer() = default;
  DenseLayer(Matrix w, Vector b);

  static DenseLayer zeros(Index d_in, Index d_out);

  Index d_in() const { return weights.cols(); }
  Index d_out() const { return weights.rows(); }
  Index param_count() const { return weights.size() + bias.size(); }

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weights.rows() == b.weights.rows() &&
           a.weights.cols() == b.weights.cols() &&
           a.bias.size() == b.bias.size() && a.weights == b.weights &&
           a.bias == b.bias;
  }
};

Vector linear_forward(const Eigen::Ref<const Vector>& x, const DenseLayer& layer);

Vector relu(const Eigen::Ref<const Vector>& x);

// log(1 + e^x) + delta, evaluated without overflow for large |x|.
double softplus(double x, double delta);

// Derivative of softplus, i.e. the logistic function.
double sigmoid(double x);

// Inverse of softplus(., delta) for target values above delta.
double softplus_inverse(double value, double delta);

// Negative log density of N(mu, sigma^2) at y. Throws DomainError if sigma <= 0.
double nll_gaussian(double y, double mu, double sigma);

enum class Group { trunk, mu, sigma };

// All weights of a branching network. The trunk is shared; `mu` and `sigma`
// each end with a 1-unit head layer. Flat order is trunk, mu, sigma; inside a
// layer the weights come first in column-major order, followed by the bias.
struct ParameterSet {
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> mu;
  std::vector<DenseLayer> sigma;

  Index flat_size() const;
  Vector flatten() const;
  // Overwrites every parameter from `flat`; shapes stay as they are.
  void assign_flat(const Eigen::Ref<const Vector>& flat);

  std::vector<DenseLayer>& group(Group g);
  const std::vector<DenseLayer>& group(Group g) const;

  // Offset of the first scalar of `group[layer]` in the flat vector.
  Index offset_of(Group g, std::size_t layer) const;

  // True when every layer of `other` has the same shape as ours.
  bool same_shape(const ParameterSet& other) const;

  bool all_finite() const;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

ParameterSet unflatten(const ParameterSet& shape_like,
                       const Eigen::Ref<const Vector>& flat);

// Mean and standard deviation for a batch of inputs.
struct BatchOutput {
  Vector mean;
  Vector stddev;
};

// Inputs are laid out one sample per column: x has shape (d0 x batch).
BatchOutput forward(const ParameterSet& params, double delta,
                    const Eigen::Ref<const Matrix>& x);

struct Gradient {
  Vector flat;      // d(sum of nll)/d(theta), length flat_size()
  double loss = 0;  // sum of nll over the batch
};

// Analytic gradient of the summed Gaussian negative log-likelihood.
// Throws NumericError naming the layer when an intermediate turns non-finite.
Gradient backward(const ParameterSet& params, double delta,
                  const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Vector>& y);

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(Index flat_size, double learning_rate);
};

// One bias-corrected Adam update of `params` in place.
void adam_step(ParameterSet& params, const Eigen::Ref<const Vector>& grads,
               AdamState& state);

}  // namespace fleetcm::nn
