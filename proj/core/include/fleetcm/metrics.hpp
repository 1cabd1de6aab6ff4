#pragma once

// Point-forecast errors, central-interval coverage and the calibration curve
// of Gaussian predictive densities.

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fleetcm/model.hpp"

namespace fleetcm::metrics {

using model::GaussianPrediction;

struct PointErrors {
  double rmse = 0;   // kW
  double mae = 0;    // kW
  double nrmse = 0;  // percent of rated power
  double nmae = 0;   // percent of rated power
};

PointErrors point_errors(std::span<const GaussianPrediction> preds, std::span<const double> y,
                         double rated_power);

// Standard normal quantile (Wichura's AS241, relative error ~1e-16).
// Throws DomainError outside (0, 1).
double inverse_normal_cdf(double p);

// Fraction of rows with |y - mean| <= z_{(1+level)/2} * stddev.
double coverage(std::span<const GaussianPrediction> preds, std::span<const double> y, double level);

struct CalibrationBin {
  double nominal = 0;
  double empirical = 0;
  double error = 0;  // empirical - nominal
};

struct CalibrationCurve {
  std::vector<CalibrationBin> bins;
  double mce = 0;  // max |error|, percent
};

// i/n_bins for i = 1..n_bins-1, plus 0.95 and 0.99 when not already present.
// n_bins = 20 gives 0.05, 0.10, ..., 0.95, 0.99.
std::vector<double> nominal_levels(int n_bins = 20);

CalibrationCurve calibration_curve(std::span<const GaussianPrediction> preds,
                                   std::span<const double> y, int n_bins = 20);
CalibrationCurve calibration_curve_at(std::span<const GaussianPrediction> preds,
                                      std::span<const double> y, std::span<const double> levels);

struct EvaluationReport {
  std::size_t n = 0;
  double rated_power = 0;
  PointErrors errors;
  std::map<double, double> coverage;  // level -> empirical coverage
  std::vector<CalibrationBin> calibration_bins;
  double mce = 0;  // percent
  double mean_nll = 0;

  nlohmann::json to_json() const;
  // One row per calibration level: level,empirical,error
  void write_calibration_csv(std::ostream& out) const;
};

EvaluationReport evaluate(std::span<const GaussianPrediction> preds, std::span<const double> y,
                          double rated_power, std::span<const double> calibration_levels,
                          std::span<const double> coverage_levels);

}  // namespace fleetcm::metrics
