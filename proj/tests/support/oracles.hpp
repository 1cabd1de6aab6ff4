#pragma once

// Reference computations written independently of the library code paths
// they are used to check.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <quadmath.h>

#include "fleetcm/model.hpp"
#include "fleetcm/nn.hpp"

namespace oracle {

using fleetcm::nn::DenseLayer;
using fleetcm::nn::Index;
using fleetcm::nn::Matrix;
using fleetcm::nn::ParameterSet;
using fleetcm::nn::Vector;

// Each helper is templated on the arithmetic type so the finite-difference
// oracle can run in quad precision.
using Quad = __float128;

inline double r_log(double v) { return std::log(v); }
inline double r_exp(double v) { return std::exp(v); }
inline double r_log1p(double v) { return std::log1p(v); }
inline Quad r_log(Quad v) { return logq(v); }
inline Quad r_exp(Quad v) { return expq(v); }
inline Quad r_log1p(Quad v) { return log1pq(v); }

template <class Real = double>
std::vector<Real> dense(const DenseLayer& l, const std::vector<Real>& x, bool relu) {
  std::vector<Real> out(static_cast<std::size_t>(l.d_out()));
  for (Index j = 0; j < l.d_out(); ++j) {
    Real s = l.bias[j];
    for (Index i = 0; i < l.d_in(); ++i) s += Real(l.weights(j, i)) * x[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(j)] = relu ? std::max(Real(0), s) : s;
  }
  return out;
}

// Mean and stddev of one sample by explicit loops.
template <class Real = double>
std::pair<Real, Real> naive_predict(const ParameterSet& p, double delta, const std::vector<Real>& x) {
  std::vector<Real> h = x;
  for (const auto& l : p.trunk) h = dense(l, h, true);
  auto branch = [&](const std::vector<DenseLayer>& layers) {
    std::vector<Real> b = h;
    for (std::size_t i = 0; i < layers.size(); ++i) b = dense(layers[i], b, i + 1 < layers.size());
    return b[0];
  };
  const Real mu = branch(p.mu);
  const Real z = branch(p.sigma);
  const Real sp = z > 0 ? z + r_log1p(r_exp(-z)) : r_log1p(r_exp(z));
  return {mu, sp + Real(delta)};
}

template <class Real = double>
Real naive_loss(const ParameterSet& p, double delta, const Matrix& x, const Vector& y) {
  const Real half_log_2pi = r_log(Real(2) * Real(std::numbers::pi)) / 2;
  Real total = 0;
  for (Index c = 0; c < x.cols(); ++c) {
    std::vector<Real> col(x.col(c).data(), x.col(c).data() + x.rows());
    const auto [mu, sigma] = naive_predict<Real>(p, delta, col);
    const Real r = Real(y[c]) - mu;
    total += half_log_2pi + r_log(sigma) + r * r / (2 * sigma * sigma);
  }
  return total;
}

// Central differences of naive_loss over every flat parameter. The loss is
// evaluated in quad precision so cancellation noise stays far below the
// gradients being checked; the divisor is the step actually taken.
inline Vector finite_difference(const ParameterSet& p, double delta, const Matrix& x,
                                const Vector& y, double step = 1e-5) {
  const Vector flat = p.flatten();
  Vector g(flat.size());
  ParameterSet probe = p;
  for (Index i = 0; i < flat.size(); ++i) {
    Vector f = flat;
    const double hi = flat[i] + step;
    const double lo = flat[i] - step;
    f[i] = hi;
    probe.assign_flat(f);
    const Quad up = naive_loss<Quad>(probe, delta, x, y);
    f[i] = lo;
    probe.assign_flat(f);
    const Quad down = naive_loss<Quad>(probe, delta, x, y);
    g[i] = static_cast<double>((up - down) / (Quad(hi) - Quad(lo)));
  }
  return g;
}

// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor)
inline double max_relative_error(const Vector& a, const Vector& n, double floor = 1e-6) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(n[i]), floor});
    worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
  }
  return worst;
}

struct GradientCase {
  fleetcm::model::ArchitectureSpec arch;
  ParameterSet params;
  Matrix x;
  Vector y;
};

// Smallest |pre-activation| feeding a ReLU over the whole batch.
inline double relu_margin(const GradientCase& c) {
  double margin = INFINITY;
  auto track = [&](const DenseLayer& l, std::vector<double>& h) {
    h = dense(l, h, false);
    for (double& v : h) {
      margin = std::min(margin, std::abs(v));
      v = std::max(0.0, v);
    }
  };
  for (Index col = 0; col < c.x.cols(); ++col) {
    std::vector<double> h(c.x.col(col).data(), c.x.col(col).data() + c.x.rows());
    for (const auto& l : c.params.trunk) track(l, h);
    for (const auto* branch : {&c.params.mu, &c.params.sigma}) {
      std::vector<double> b = h;
      for (std::size_t i = 0; i + 1 < branch->size(); ++i) track((*branch)[i], b);
    }
  }
  return margin;
}

// Small random architecture (d0 <= 5, widths <= 8, batch <= 16) with random
// parameters, inputs and targets. Biases are non-zero so every path is used.
// Draws with a ReLU input within 1e-3 of zero are redrawn: a finite-difference
// step could cross the kink there, where the loss has no derivative.
inline GradientCase random_case_any(std::mt19937_64& rng);

inline GradientCase random_case(std::mt19937_64& rng) {
  GradientCase c = random_case_any(rng);
  while (relu_margin(c) < 1e-3) c = random_case_any(rng);
  return c;
}

inline GradientCase random_case_any(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> width(1, 8);
  std::uniform_int_distribution<int> depth(0, 2);
  GradientCase c;
  c.arch.d0 = std::uniform_int_distribution<int>(1, 5)(rng);
  const int trunk = 1 + depth(rng);
  for (int i = 0; i < trunk; ++i) c.arch.trunk_widths.push_back(width(rng));
  for (int i = depth(rng); i > 0; --i) c.arch.mu_widths.push_back(width(rng));
  for (int i = depth(rng); i > 0; --i) c.arch.sigma_widths.push_back(width(rng));
  c.arch.delta = 0.001;
  c.params = fleetcm::model::build(c.arch, rng());
  std::normal_distribution<double> n01;
  Vector flat = c.params.flatten();
  for (Index i = 0; i < flat.size(); ++i) flat[i] += 0.1 * n01(rng);
  c.params.assign_flat(flat);
  const int batch = std::uniform_int_distribution<int>(1, 16)(rng);
  c.x.resize(c.arch.d0, batch);
  c.y.resize(batch);
  for (Index i = 0; i < c.x.size(); ++i) c.x.data()[i] = n01(rng);
  for (Index i = 0; i < batch; ++i) c.y[i] = n01(rng);
  return c;
}

// Run-length properties of the tabular CUSUM for i.i.d. N(shift, 1) inputs
// via the Brook-Evans Markov chain: each one-sided statistic is discretized
// into m cells below h, and the two-sided chart is approximated by treating
// its sides as independent (1/ARL = 1/ARL_H + 1/ARL_L for k > 0).

// Transition matrix among the non-absorbing states of a one-sided chart.
inline Matrix one_sided_transitions(double k, double h, double shift, int m) {
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  const double w = 2.0 * h / (2.0 * m - 1.0);
  // States: 0 (S = 0) and cell midpoints j * w for j = 1..m-1, all below h.
  Matrix q = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const double s = i * w;
    q(i, 0) = cdf(k - s + w / 2.0 - shift);
    for (int j = 1; j < m; ++j) {
      q(i, j) = cdf(j * w + w / 2.0 - s + k - shift) - cdf(j * w - w / 2.0 - s + k - shift);
    }
  }
  return q;
}

inline double one_sided_arl(double k, double h, double shift, int m = 400) {
  const Matrix q = one_sided_transitions(k, h, shift, m);
  const Matrix a = Matrix::Identity(m, m) - q;
  const Vector arl = a.partialPivLu().solve(Vector::Ones(m));
  return arl[0];
}

// P(no alarm within `steps`) for one side, starting from zero.
inline double one_sided_survival(double k, double h, double shift, int steps, int m = 400) {
  const Matrix q = one_sided_transitions(k, h, shift, m);
  Vector p = Vector::Zero(m);
  p[0] = 1.0;
  for (int t = 0; t < steps; ++t) p = q.transpose() * p;
  return p.sum();
}

// P(two-sided alarm within `steps`), treating the sides as independent.
inline double two_sided_alarm_probability(double k, double h, double shift, int steps) {
  return 1.0 - one_sided_survival(k, h, shift, steps) * one_sided_survival(k, h, -shift, steps);
}

inline double two_sided_arl(double k, double h, double shift) {
  const double up = one_sided_arl(k, h, shift);
  const double down = one_sided_arl(k, h, -shift);
  return 1.0 / (1.0 / up + 1.0 / down);
}

}  // namespace oracle
