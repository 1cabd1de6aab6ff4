#include "fleetcm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "fleetcm/csv.hpp"
#include "fleetcm/errors.hpp"

namespace fleetcm::metrics {

namespace {

void check_lengths(std::span<const GaussianPrediction> preds, std::span<const double> y) {
  if (preds.size() != y.size()) {
    throw ShapeError("metrics", std::to_string(preds.size()) + " predictions but " +
                                    std::to_string(y.size()) + " observations");
  }
  if (preds.empty()) throw ShapeError("metrics", "no rows to evaluate");
}

double poly(const double* c, int n, double x) {
  double r = c[n - 1];
  for (int i = n - 2; i >= 0; --i) r = r * x + c[i];
  return r;
}

}  // namespace

PointErrors point_errors(std::span<const GaussianPrediction> preds, std::span<const double> y,
                         double rated_power) {
  check_lengths(preds, y);
  if (!(rated_power > 0.0)) throw DomainError("metrics", "rated power must be positive");
  double sq = 0.0;
  double abs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - preds[i].mean;
    sq += r * r;
    abs += std::abs(r);
  }
  const auto n = static_cast<double>(y.size());
  PointErrors e;
  e.rmse = std::sqrt(sq / n);
  e.mae = abs / n;
  e.nrmse = 100.0 * e.rmse / rated_power;
  e.nmae = 100.0 * e.mae / rated_power;
  return e;
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("metrics", "normal quantile needs p in (0, 1)");
  }
  // Algorithm AS241 (PPND16), Wichura 1988.
  static const double a[] = {3.3871328727963666080e0, 1.3314166789178437745e2,
                             1.9715909503065514427e3, 1.3731693765509461125e4,
                             4.5921953931549871457e4, 6.7265770927008700853e4,
                             3.3430575583588128105e4, 2.5090809287301226727e3};
  static const double b[] = {1.0,
                             4.2313330701600911252e1, 6.8718700749205790830e2,
                             5.3941960214247511077e3, 2.1213794301586595867e4,
                             3.9307895800092710610e4, 2.8729085735721942674e4,
                             5.2264952788528545610e3};
  static const double c[] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                             5.76949722146069140550e0, 3.64784832476320460504e0,
                             1.27045825245236838258e0, 2.41780725177450611770e-1,
                             2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[] = {1.0,
                             2.05319162663775882187e0, 1.67638483018380384940e0,
                             6.89767334985100004550e-1, 1.48103976427480074590e-1,
                             1.51986665636164571966e-2, 5.47593808499534494600e-4,
                             1.05075007164441684324e-9};
  static const double e[] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                             1.78482653991729133580e0, 2.96560571828504891230e-1,
                             2.65321895265761230930e-2, 1.24266094738807843860e-3,
                             2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[] = {1.0,
                             5.99832206555887937690e-1, 1.36929880922735805310e-1,
                             1.48753612908506148525e-2, 7.86869131145613259100e-4,
                             1.84631831751005468180e-5, 1.42151175831644588870e-7,
                             2.04426310338993978564e-15};
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * poly(a, 8, r) / poly(b, 8, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = poly(c, 8, r) / poly(d, 8, r);
  } else {
    r -= 5.0;
    val = poly(e, 8, r) / poly(f, 8, r);
  }
  return q < 0.0 ? -val : val;
}

double coverage(std::span<const GaussianPrediction> preds, std::span<const double> y, double level) {
  check_lengths(preds, y);
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("metrics", "coverage level must lie in (0, 1)");
  }
  const double z = inverse_normal_cdf(0.5 * (1.0 + level));
  std::size_t inside = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::abs(y[i] - preds[i].mean) <= z * preds[i].stddev) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(y.size());
}

std::vector<double> nominal_levels(int n_bins) {
  if (n_bins < 2) throw DomainError("metrics", "calibration needs at least 2 bins");
  std::vector<double> levels;
  for (int i = 1; i < n_bins; ++i) levels.push_back(static_cast<double>(i) / n_bins);
  for (double extra : {0.95, 0.99}) {
    auto it = std::find_if(levels.begin(), levels.end(),
                           [&](double l) { return std::abs(l - extra) < 1e-12; });
    if (it == levels.end()) {
      levels.push_back(extra);
    } else {
      *it = extra;
    }
  }
  std::sort(levels.begin(), levels.end());
  return levels;
}

CalibrationCurve calibration_curve_at(std::span<const GaussianPrediction> preds,
                                      std::span<const double> y, std::span<const double> levels) {
  check_lengths(preds, y);
  // Sort standardized distances once; coverage at level L is the fraction of
  // rows with |r|/sigma <= z_L.
  std::vector<double> dist(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = std::abs(y[i] - preds[i].mean);
    dist[i] = preds[i].stddev > 0.0 ? r / preds[i].stddev
                                    : (r == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  }
  std::sort(dist.begin(), dist.end());
  CalibrationCurve curve;
  double worst = 0.0;
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) {
      throw DomainError("metrics", "calibration level must lie in (0, 1)");
    }
    const double z = inverse_normal_cdf(0.5 * (1.0 + level));
    const auto inside = static_cast<double>(std::upper_bound(dist.begin(), dist.end(), z) -
                                            dist.begin());
    CalibrationBin bin;
    bin.nominal = level;
    bin.empirical = inside / static_cast<double>(dist.size());
    bin.error = bin.empirical - bin.nominal;
    worst = std::max(worst, std::abs(bin.error));
    curve.bins.push_back(bin);
  }
  curve.mce = 100.0 * worst;
  return curve;
}

CalibrationCurve calibration_curve(std::span<const GaussianPrediction> preds,
                                   std::span<const double> y, int n_bins) {
  const auto levels = nominal_levels(n_bins);
  return calibration_curve_at(preds, y, levels);
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json cov = nlohmann::json::object();
  for (const auto& [level, value] : coverage) cov[csv::format_number(level)] = value;
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : calibration_bins) {
    bins.push_back({{"nominal", b.nominal}, {"empirical", b.empirical}, {"error", b.error}});
  }
  return {{"n", n},
          {"rated_power_kw", rated_power},
          {"rmse_kw", errors.rmse},
          {"mae_kw", errors.mae},
          {"nrmse_percent", errors.nrmse},
          {"nmae_percent", errors.nmae},
          {"mean_nll", mean_nll},
          {"coverage", cov},
          {"calibration", bins},
          {"mce_percent", mce}};
}

void EvaluationReport::write_calibration_csv(std::ostream& out) const {
  out << "level,empirical,error\n";
  for (const auto& b : calibration_bins) {
    out << csv::format_number(b.nominal) << ',' << csv::format_number(b.empirical) << ','
        << csv::format_number(b.error) << '\n';
  }
}

EvaluationReport evaluate(std::span<const GaussianPrediction> preds, std::span<const double> y,
                          double rated_power, std::span<const double> calibration_levels,
                          std::span<const double> coverage_levels) {
  EvaluationReport r;
  r.n = y.size();
  r.rated_power = rated_power;
  r.errors = point_errors(preds, y, rated_power);
  for (double level : coverage_levels) r.coverage[level] = coverage(preds, y, level);
  const CalibrationCurve curve = calibration_curve_at(preds, y, calibration_levels);
  r.calibration_bins = curve.bins;
  r.mce = curve.mce;
  double nll = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    nll += nn::nll_gaussian(y[i], preds[i].mean, preds[i].stddev);
  }
  r.mean_nll = nll / static_cast<double>(y.size());
  return r;
}

}  // namespace fleetcm::metrics
