#pragma once

// Synthetic fleet generator. Units share a smooth power curve (with small
// per-unit perturbations) and heteroscedastic Gaussian noise whose stddev is
// small below cut-in and at rated power and largest on the steep part of the
// curve. The exact mean and stddev used for every row are returned so models
// can be checked against them.

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "fleetcm/data.hpp"

namespace fleetcm::sim {

struct PowerCurve {
  double cut_in = 3.0;        // m/s
  double rated_speed = 12.5;  // m/s
  double rated_power = 2050;  // kW

  // Position on the ramp in [0, 1]; 0 below cut-in, 1 above rated speed.
  double ramp(double wind_speed) const;
  double mean_power(double wind_speed) const;
};

struct NoiseModel {
  double floor_kw = 20.0;       // stddev off the ramp
  double peak_fraction = 0.08;  // extra stddev at mid-ramp, fraction of rated power
  double scale = 1.0;           // 0 gives noise-free targets

  double stddev(const PowerCurve& curve, double wind_speed) const;
};

enum class FaultType { power_shift, standby, warning, stop };

// Rows [start_row, start_row + duration_rows) of one unit are affected.
// power_shift adds shift_sigmas * sigma* to the power and is followed by a
// forced outage of outage_rows rows; the other types record an event of
// that category over the affected rows.
struct FaultSpec {
  std::size_t unit = 0;
  std::int64_t start_row = 0;
  std::int64_t duration_rows = 0;
  FaultType type = FaultType::power_shift;
  double shift_sigmas = -3.0;
  std::int64_t outage_rows = 36;
};

struct SimConfig {
  std::size_t n_units = 1;
  std::vector<std::size_t> rows_per_unit = {1000};  // one entry, or one per unit
  PowerCurve curve;
  double unit_variation = 0.02;  // relative spread of per-unit rated speed
  NoiseModel noise;
  double weibull_shape = 2.0;
  double weibull_scale = 8.0;
  double wind_autocorrelation = 0.97;
  std::vector<FaultSpec> faults;
  std::uint64_t seed = 1;
  Timestamp start = Timestamp{std::chrono::sys_days{std::chrono::year{2020} / 1 / 1}};
  std::chrono::seconds cadence = kDefaultCadence;

  // Throws ConfigError.
  void validate() const;
  std::size_t rows_for(std::size_t unit) const;

  nlohmann::json to_json() const;
  static SimConfig from_json(const nlohmann::json& j);
};

struct UnitTruth {
  PowerCurve curve;    // this unit's perturbed curve
  data::Vector mu;     // healthy mean power per row (kW)
  data::Vector sigma;  // noise stddev per row (kW)
};

struct SimulatedFleet {
  data::ScadaSchema schema;               // default 41-feature set
  std::vector<data::ScadaTable> raw;      // per unit, SCADA columns
  std::vector<data::TurbineDataset> units;
  data::EventLog events;
  std::vector<UnitTruth> truth;
};

SimulatedFleet simulate_fleet(const SimConfig& config);

// Labeled 72-hour windows for decision-interval calibration. Faulty windows
// get a power shift starting at a random step in the first half of the
// window; the fault onset (forced outage start) is the instant right after
// the window's last row.
struct WindowCorpusConfig {
  std::size_t healthy = 22;
  std::size_t faulty = 22;
  std::size_t length = 432;
  double shift_sigmas = -2.0;
  std::uint64_t seed = 7;
};

struct SimulatedWindow {
  std::string id;
  bool faulty = false;
  Timestamp fault_onset{};
  data::ScadaTable raw;
  data::TurbineDataset dataset;
  UnitTruth truth;
};

std::vector<SimulatedWindow> simulate_windows(const SimConfig& base, const WindowCorpusConfig& cfg);

}  // namespace fleetcm::sim
