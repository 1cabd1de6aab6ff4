#include "fleetcm/nn.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fleetcm/errors.hpp"

namespace fleetcm::nn {

namespace {

constexpr double kSoftplusLinearBranch = 30.0;
const double kHalfLogTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_finite(const Matrix& m, const char* what, std::size_t layer_index) {
  if (!m.allFinite()) {
    throw NumericError("nn", std::string("non-finite ") + what + " at layer " +
                                 std::to_string(layer_index));
  }
}

// Pre-activations and post-activations of one path through the network.
struct PathCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // W h + b of each layer
};

// Runs `layers`, applying ReLU after every layer except (optionally) the last.
Matrix run_layers(const std::vector<DenseLayer>& layers,
                  const Eigen::Ref<const Matrix>& input, bool relu_on_last,
                  std::size_t first_index, PathCache* cache) {
  Matrix h = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& layer = layers[i];
    if (h.rows() != layer.d_in()) {
      throw ShapeError("nn", "layer " + std::to_string(first_index + i) +
                                 " expects width " + std::to_string(layer.d_in()) +
                                 ", got " + std::to_string(h.rows()));
    }
    Matrix z = layer.weights * h;
    z.colwise() += layer.bias;
    require_finite(z, "pre-activation", first_index + i);
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(z);
    }
    const bool last = i + 1 == layers.size();
    h = (!last || relu_on_last) ? Matrix(z.cwiseMax(0.0)) : std::move(z);
  }
  return h;
}

// Backpropagates `dz_last` (gradient w.r.t. the pre-activation of the final
// layer) through a path, writing weight/bias gradients into `grad` and
// returning the gradient with respect to the path input.
Matrix backprop_layers(const std::vector<DenseLayer>& layers,
                       const PathCache& cache, Matrix dz,
                       const std::vector<Index>& offsets, Vector& grad) {
  for (std::size_t r = layers.size(); r-- > 0;) {
    const DenseLayer& layer = layers[r];
    const Matrix& input = cache.inputs[r];
    const Index base = offsets[r];
    Eigen::Map<Matrix> dw(grad.data() + base, layer.d_out(), layer.d_in());
    dw.noalias() += dz * input.transpose();
    grad.segment(base + layer.weights.size(), layer.d_out()) += dz.rowwise().sum();
    Matrix dh = layer.weights.transpose() * dz;
    if (r == 0) {
      return dh;
    }
    // Input of layer r is ReLU(pre of layer r-1).
    const Matrix& prev_pre = cache.pre[r - 1];
    dz = dh.cwiseProduct((prev_pre.array() > 0.0).cast<double>().matrix());
  }
  return dz;
}

std::vector<Index> layer_offsets(const ParameterSet& p, Group g) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < p.group(g).size(); ++i) {
    out.push_back(p.offset_of(g, i));
  }
  return out;
}

}  // namespace

DenseLayer::DenseLayer(Matrix w, Vector b) : weights(std::move(w)), bias(std::move(b)) {
  if (bias.size() != weights.rows()) {
    throw ShapeError("nn", "bias length " + std::to_string(bias.size()) +
                               " does not match weight rows " +
                               std::to_string(weights.rows()));
  }
}

DenseLayer DenseLayer::zeros(Index d_in, Index d_out) {
  return DenseLayer(Matrix::Zero(d_out, d_in), Vector::Zero(d_out));
}

Vector linear_forward(const Eigen::Ref<const Vector>& x, const DenseLayer& layer) {
  if (x.size() != layer.d_in()) {
    throw ShapeError("nn", "linear_forward: input length " + std::to_string(x.size()) +
                               " != d_in " + std::to_string(layer.d_in()));
  }
  return layer.weights * x + layer.bias;
}

Vector relu(const Eigen::Ref<const Vector>& x) { return x.cwiseMax(0.0); }

double softplus(double x, double delta) {
  if (x > kSoftplusLinearBranch) {
    return x + std::log1p(std::exp(-x)) + delta;
  }
  return std::log1p(std::exp(x)) + delta;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_inverse(double value, double delta) {
  const double s = value - delta;
  if (!(s > 0.0)) {
    throw DomainError("nn", "softplus_inverse needs value > delta");
  }
  if (s > kSoftplusLinearBranch) {
    return s + std::log(-std::expm1(-s));
  }
  return std::log(std::expm1(s));
}

double nll_gaussian(double y, double mu, double sigma) {
  if (!(sigma > 0.0)) {
    throw DomainError("nn", "nll_gaussian requires sigma > 0, got " + std::to_string(sigma));
  }
  const double r = (y - mu) / sigma;
  return kHalfLogTwoPi + std::log(sigma) + 0.5 * r * r;
}

// ---------------------------------------------------------------------------
// ParameterSet

std::vector<DenseLayer>& ParameterSet::group(Group g) {
  switch (g) {
    case Group::trunk: return trunk;
    case Group::mu: return mu;
    case Group::sigma: return sigma;
  }
  return trunk;
}

const std::vector<DenseLayer>& ParameterSet::group(Group g) const {
  return const_cast<ParameterSet*>(this)->group(g);
}

Index ParameterSet::flat_size() const {
  Index n = 0;
  for (const auto* layers : {&trunk, &mu, &sigma}) {
    for (const auto& l : *layers) n += l.param_count();
  }
  return n;
}

Index ParameterSet::offset_of(Group g, std::size_t layer) const {
  Index off = 0;
  for (Group cur : {Group::trunk, Group::mu, Group::sigma}) {
    const auto& layers = group(cur);
    if (cur == g) {
      for (std::size_t i = 0; i < layer; ++i) off += layers[i].param_count();
      return off;
    }
    for (const auto& l : layers) off += l.param_count();
  }
  return off;
}

Vector ParameterSet::flatten() const {
  Vector flat(flat_size());
  Index off = 0;
  for (const auto* layers : {&trunk, &mu, &sigma}) {
    for (const auto& l : *layers) {
      flat.segment(off, l.weights.size()) =
          Eigen::Map<const Vector>(l.weights.data(), l.weights.size());
      off += l.weights.size();
      flat.segment(off, l.bias.size()) = l.bias;
      off += l.bias.size();
    }
  }
  return flat;
}

void ParameterSet::assign_flat(const Eigen::Ref<const Vector>& flat) {
  if (flat.size() != flat_size()) {
    throw ShapeError("nn", "flat vector length " + std::to_string(flat.size()) +
                               " != parameter count " + std::to_string(flat_size()));
  }
  Index off = 0;
  for (auto* layers : {&trunk, &mu, &sigma}) {
    for (auto& l : *layers) {
      Eigen::Map<Vector>(l.weights.data(), l.weights.size()) =
          flat.segment(off, l.weights.size());
      off += l.weights.size();
      l.bias = flat.segment(off, l.bias.size());
      off += l.bias.size();
    }
  }
}

bool ParameterSet::same_shape(const ParameterSet& other) const {
  for (Group g : {Group::trunk, Group::mu, Group::sigma}) {
    const auto& a = group(g);
    const auto& b = other.group(g);
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].d_in() != b[i].d_in() || a[i].d_out() != b[i].d_out()) return false;
    }
  }
  return true;
}

bool ParameterSet::all_finite() const {
  for (const auto* layers : {&trunk, &mu, &sigma}) {
    for (const auto& l : *layers) {
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    }
  }
  return true;
}

ParameterSet unflatten(const ParameterSet& shape_like,
                       const Eigen::Ref<const Vector>& flat) {
  ParameterSet out = shape_like;
  out.assign_flat(flat);
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward

BatchOutput forward(const ParameterSet& params, double delta,
                    const Eigen::Ref<const Matrix>& x) {
  const Matrix shared = run_layers(params.trunk, x, true, 0, nullptr);
  const std::size_t mu_first = params.trunk.size();
  const std::size_t sigma_first = mu_first + params.mu.size();
  const Matrix mean = run_layers(params.mu, shared, false, mu_first, nullptr);
  const Matrix raw = run_layers(params.sigma, shared, false, sigma_first, nullptr);
  BatchOutput out;
  out.mean = mean.row(0).transpose();
  out.stddev.resize(raw.cols());
  for (Index i = 0; i < raw.cols(); ++i) {
    out.stddev[i] = softplus(raw(0, i), delta);
  }
  return out;
}

Gradient backward(const ParameterSet& params, double delta,
                  const Eigen::Ref<const Matrix>& x,
                  const Eigen::Ref<const Vector>& y) {
  const Index batch = x.cols();
  if (batch == 0) {
    throw ShapeError("nn", "backward: empty batch");
  }
  if (y.size() != batch) {
    throw ShapeError("nn", "backward: " + std::to_string(batch) + " inputs but " +
                               std::to_string(y.size()) + " targets");
  }

  PathCache trunk_cache;
  PathCache mu_cache;
  PathCache sigma_cache;
  const Matrix shared = run_layers(params.trunk, x, true, 0, &trunk_cache);
  const std::size_t mu_first = params.trunk.size();
  const std::size_t sigma_first = mu_first + params.mu.size();
  const Matrix mean = run_layers(params.mu, shared, false, mu_first, &mu_cache);
  const Matrix raw = run_layers(params.sigma, shared, false, sigma_first, &sigma_cache);

  Gradient g;
  g.flat = Vector::Zero(params.flat_size());
  Matrix d_mean(1, batch);
  Matrix d_raw(1, batch);
  for (Index i = 0; i < batch; ++i) {
    const double mu = mean(0, i);
    const double sigma = softplus(raw(0, i), delta);
    const double r = y[i] - mu;
    const double inv_var = 1.0 / (sigma * sigma);
    g.loss += nll_gaussian(y[i], mu, sigma);
    d_mean(0, i) = -r * inv_var;
    d_raw(0, i) = (1.0 / sigma - r * r * inv_var / sigma) * sigmoid(raw(0, i));
  }
  if (!std::isfinite(g.loss) || !d_mean.allFinite() || !d_raw.allFinite()) {
    throw NumericError("nn", "non-finite loss gradient at output layer " +
                                 std::to_string(sigma_first + params.sigma.size() - 1));
  }

  const auto relu_mask = [&]() {
    return (trunk_cache.pre.back().array() > 0.0).cast<double>().matrix();
  };
  Matrix d_shared =
      backprop_layers(params.mu, mu_cache, d_mean, layer_offsets(params, Group::mu), g.flat);
  d_shared += backprop_layers(params.sigma, sigma_cache, d_raw,
                              layer_offsets(params, Group::sigma), g.flat);
  const Matrix dz_trunk = d_shared.cwiseProduct(relu_mask());
  backprop_layers(params.trunk, trunk_cache, dz_trunk,
                  layer_offsets(params, Group::trunk), g.flat);

  if (!g.flat.allFinite()) {
    throw NumericError("nn", "non-finite gradient in trunk layers 0.." +
                                 std::to_string(params.trunk.size() - 1));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_size(Index flat_size, double learning_rate) {
  AdamState s;
  s.first_moment = Vector::Zero(flat_size);
  s.second_moment = Vector::Zero(flat_size);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(ParameterSet& params, const Eigen::Ref<const Vector>& grads,
               AdamState& state) {
  const Index n = params.flat_size();
  if (grads.size() != n) {
    throw ShapeError("nn", "adam_step: gradient length " + std::to_string(grads.size()) +
                               " != parameter count " + std::to_string(n));
  }
  if (state.first_moment.size() != n || state.second_moment.size() != n) {
    throw ShapeError("nn", "adam_step: optimizer state sized for a different network");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  Index off = 0;
  for (auto* layers : {&params.trunk, &params.mu, &params.sigma}) {
    for (auto& l : *layers) {
      Eigen::Map<Vector> w(l.weights.data(), l.weights.size());
      const Index nw = l.weights.size();
      w.array() -= state.learning_rate * (state.first_moment.segment(off, nw).array() / c1) /
                   ((state.second_moment.segment(off, nw).array() / c2).sqrt() + state.epsilon);
      off += nw;
      const Index nb = l.bias.size();
      l.bias.array() -= state.learning_rate * (state.first_moment.segment(off, nb).array() / c1) /
                        ((state.second_moment.segment(off, nb).array() / c2).sqrt() + state.epsilon);
      off += nb;
    }
  }
  if (!params.all_finite()) {
    throw NumericError("nn", "adam_step produced non-finite parameters at step " +
                                 std::to_string(state.step_count));
  }
}

}  // namespace fleetcm::nn
