#include "fleetcm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fleetcm/errors.hpp"

namespace fleetcm::sim {

namespace {

using data::Index;
using data::RowStatus;

// splitmix64, used to derive independent stream seeds from one base seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PowerCurve unit_curve(const SimConfig& cfg, std::size_t unit) {
  std::mt19937_64 rng(mix_seed(cfg.seed, 1000 + unit));
  std::normal_distribution<double> n01;
  PowerCurve c = cfg.curve;
  if (unit > 0 || cfg.n_units > 1) {
    const double f = std::clamp(1.0 + cfg.unit_variation * n01(rng), 0.9, 1.1);
    c.rated_speed = std::max(c.cut_in + 1.0, c.rated_speed * f);
  }
  return c;
}

struct Generated {
  data::ScadaTable raw;
  UnitTruth truth;
};

// Raw SCADA rows for one unit. `shift_sigmas[r]` is added (in units of the
// row's sigma*) to the realised power.
Generated generate_unit(const SimConfig& cfg, const PowerCurve& curve, std::size_t rows,
                        std::uint64_t stream_seed, Timestamp start, const std::string& unit_id) {
  const data::ScadaSchema schema = data::ScadaSchema::default_set();
  std::mt19937_64 rng(stream_seed);
  std::normal_distribution<double> n01;
  const auto n = static_cast<Index>(rows);
  const auto n_cols = static_cast<Index>(schema.features.size());

  Generated g;
  g.raw.unit_id = unit_id;
  g.raw.values.resize(n, n_cols);
  g.raw.power.resize(n);
  g.raw.status.assign(rows, RowStatus::normal);
  g.truth.curve = curve;
  g.truth.mu.resize(n);
  g.truth.sigma.resize(n);

  const double phi = cfg.wind_autocorrelation;
  const double innov = std::sqrt(1.0 - phi * phi);
  double latent = n01(rng);
  double ambient_noise = 0.0;
  double direction = std::uniform_real_distribution<double>(0.0, 360.0)(rng);

  for (Index r = 0; r < n; ++r) {
    const Timestamp ts = start + cfg.cadence * r;
    g.raw.timestamps.push_back(ts);
    latent = phi * latent + innov * n01(rng);
    const double p = std::clamp(0.5 * std::erfc(-latent / std::numbers::sqrt2), 1e-12,
                                1.0 - 1e-12);
    const double v = cfg.weibull_scale * std::pow(-std::log1p(-p), 1.0 / cfg.weibull_shape);

    const double mu = curve.mean_power(v);
    const double sigma = cfg.noise.stddev(curve, v);
    g.truth.mu[r] = mu;
    g.truth.sigma[r] = sigma;
    g.raw.power[r] = mu + sigma * n01(rng);

    const double load = mu / curve.rated_power;
    const double rotor = std::min(1.0, v / curve.rated_speed);
    const double pitch =
        v < curve.cut_in ? 60.0 : std::max(0.0, (v - curve.rated_speed) * 2.2);
    const double secs = static_cast<double>(ts.time_since_epoch().count());
    const double day_phase = 2.0 * std::numbers::pi * std::fmod(secs / 86400.0, 1.0);
    const double year_phase = 2.0 * std::numbers::pi * std::fmod(secs / (365.25 * 86400.0), 1.0);
    ambient_noise = 0.95 * ambient_noise + 0.3 * n01(rng);
    const double ambient = 10.0 + 8.0 * std::sin(year_phase) + 4.0 * std::sin(day_phase) +
                           ambient_noise;
    direction = std::fmod(direction + 3.0 * n01(rng) + 360.0, 360.0);
    const double spread = 10.0 + 5.0 * std::abs(n01(rng));

    const auto temp = [&](double offset, double load_gain) {
      return ambient + offset + load_gain * load + n01(rng);
    };
    const double ws_std = std::max(0.05, v * (0.1 + 0.02 * n01(rng)));
    const double rear = temp(15.0, 20.0);
    const double front = temp(17.0, 22.0);
    const std::vector<double> row = {
        v,
        ws_std,
        std::max(0.0, v - 2.0 * ws_std * (1.0 + 0.1 * n01(rng))),
        v + 2.5 * ws_std * (1.0 + 0.1 * n01(rng)),
        rear,
        0.5 + 0.3 * std::abs(n01(rng)),
        rear - 1.0 - std::abs(n01(rng)),
        rear + 1.0 + std::abs(n01(rng)),
        temp(30.0, 40.0),
        temp(25.0, 20.0),
        temp(12.0, 5.0),
        temp(8.0, 6.0),
        temp(10.0, 0.0) + 0.05 * pitch,
        temp(20.0, 0.0),
        pitch + 0.2 * n01(rng),
        1.5 + 2.0 * rotor + 0.1 * n01(rng),
        0.02 + 0.01 * v + 0.005 * std::abs(n01(rng)),
        front,
        0.5 + 0.3 * std::abs(n01(rng)),
        front - 1.0 - std::abs(n01(rng)),
        front + 1.0 + std::abs(n01(rng)),
        temp(10.0, 8.0),
        temp(35.0, 45.0),
        ambient + 2.0 + 0.5 * n01(rng),
        temp(8.0, 6.0),
        temp(30.0, 25.0),
        0.05 + 0.1 * rotor + 0.02 * std::abs(n01(rng)),
        temp(5.0, 0.0),
        temp(12.0, 10.0),
        temp(10.0, 0.0) + 0.05 * pitch,
        pitch + 0.2 * n01(rng),
        pitch + 0.2 * n01(rng),
        3.0 + 2.0 * rotor + 0.1 * n01(rng),
        0.02 + 0.01 * v + 0.005 * std::abs(n01(rng)),
        direction,
        std::fmod(direction + spread, 360.0),
        std::fmod(direction - spread + 360.0, 360.0),
        spread / 2.5,
    };
    for (Index c = 0; c < n_cols; ++c) g.raw.values(r, c) = row[static_cast<std::size_t>(c)];
  }
  return g;
}

std::string fault_type_name(FaultType t) {
  switch (t) {
    case FaultType::power_shift: return "power_shift";
    case FaultType::standby: return "standby";
    case FaultType::warning: return "warning";
    case FaultType::stop: return "stop";
  }
  return "power_shift";
}

FaultType fault_type_from_name(const std::string& s) {
  for (FaultType t : {FaultType::power_shift, FaultType::standby, FaultType::warning,
                      FaultType::stop}) {
    if (fault_type_name(t) == s) return t;
  }
  throw ConfigError("sim", "unknown fault type '" + s + "'");
}

}  // namespace

double PowerCurve::ramp(double wind_speed) const {
  if (wind_speed <= cut_in) return 0.0;
  if (wind_speed >= rated_speed) return 1.0;
  return (wind_speed - cut_in) / (rated_speed - cut_in);
}

double PowerCurve::mean_power(double wind_speed) const {
  const double u = ramp(wind_speed);
  return rated_power * u * u * (3.0 - 2.0 * u);
}

double NoiseModel::stddev(const PowerCurve& curve, double wind_speed) const {
  const double u = curve.ramp(wind_speed);
  return scale * (floor_kw + peak_fraction * curve.rated_power * 4.0 * u * (1.0 - u));
}

void SimConfig::validate() const {
  if (n_units == 0) throw ConfigError("sim", "n_units must be positive");
  if (rows_per_unit.empty() || (rows_per_unit.size() != 1 && rows_per_unit.size() != n_units)) {
    throw ConfigError("sim", "rows_per_unit needs one entry or one per unit");
  }
  for (std::size_t r : rows_per_unit) {
    if (r == 0) throw ConfigError("sim", "rows_per_unit entries must be positive");
  }
  if (!(curve.rated_power > 0.0)) throw ConfigError("sim", "rated power must be positive");
  if (!(curve.cut_in < curve.rated_speed) || curve.cut_in < 0.0) {
    throw ConfigError("sim", "cut-in speed must be below rated speed");
  }
  if (noise.floor_kw < 0.0 || noise.peak_fraction < 0.0 || noise.scale < 0.0) {
    throw ConfigError("sim", "noise parameters must be non-negative");
  }
  if (!(weibull_shape > 0.0) || !(weibull_scale > 0.0)) {
    throw ConfigError("sim", "Weibull parameters must be positive");
  }
  if (!(wind_autocorrelation >= 0.0 && wind_autocorrelation < 1.0)) {
    throw ConfigError("sim", "wind autocorrelation must lie in [0, 1)");
  }
  if (cadence.count() <= 0) throw ConfigError("sim", "cadence must be positive");
  for (const auto& f : faults) {
    if (f.unit >= n_units) throw ConfigError("sim", "fault references unknown unit");
    if (f.start_row < 0) throw ConfigError("sim", "fault start_row must be non-negative");
    if (f.duration_rows <= 0) {
      throw ConfigError("sim", "fault end must come after its start");
    }
    if (static_cast<std::size_t>(f.start_row + f.duration_rows) > rows_for(f.unit)) {
      throw ConfigError("sim", "fault extends past the unit's last row");
    }
    if (f.outage_rows < 0) throw ConfigError("sim", "outage_rows must be non-negative");
  }
}

std::size_t SimConfig::rows_for(std::size_t unit) const {
  return rows_per_unit.size() == 1 ? rows_per_unit.front() : rows_per_unit.at(unit);
}

nlohmann::json SimConfig::to_json() const {
  nlohmann::json faults_json = nlohmann::json::array();
  for (const auto& f : faults) {
    faults_json.push_back({{"unit", f.unit},
                           {"start_row", f.start_row},
                           {"duration_rows", f.duration_rows},
                           {"type", fault_type_name(f.type)},
                           {"shift_sigmas", f.shift_sigmas},
                           {"outage_rows", f.outage_rows}});
  }
  return {{"n_units", n_units},
          {"rows_per_unit", rows_per_unit},
          {"cut_in", curve.cut_in},
          {"rated_speed", curve.rated_speed},
          {"rated_power", curve.rated_power},
          {"unit_variation", unit_variation},
          {"noise_floor_kw", noise.floor_kw},
          {"noise_peak_fraction", noise.peak_fraction},
          {"noise_scale", noise.scale},
          {"weibull_shape", weibull_shape},
          {"weibull_scale", weibull_scale},
          {"wind_autocorrelation", wind_autocorrelation},
          {"faults", faults_json},
          {"seed", seed},
          {"start", format_timestamp(start)},
          {"cadence_seconds", cadence.count()}};
}

SimConfig SimConfig::from_json(const nlohmann::json& j) {
  SimConfig c;
  try {
    c.n_units = j.value("n_units", c.n_units);
    if (j.contains("rows_per_unit")) {
      const auto& r = j.at("rows_per_unit");
      c.rows_per_unit = r.is_array() ? r.get<std::vector<std::size_t>>()
                                     : std::vector<std::size_t>{r.get<std::size_t>()};
    }
    c.curve.cut_in = j.value("cut_in", c.curve.cut_in);
    c.curve.rated_speed = j.value("rated_speed", c.curve.rated_speed);
    c.curve.rated_power = j.value("rated_power", c.curve.rated_power);
    c.unit_variation = j.value("unit_variation", c.unit_variation);
    c.noise.floor_kw = j.value("noise_floor_kw", c.noise.floor_kw);
    c.noise.peak_fraction = j.value("noise_peak_fraction", c.noise.peak_fraction);
    c.noise.scale = j.value("noise_scale", c.noise.scale);
    c.weibull_shape = j.value("weibull_shape", c.weibull_shape);
    c.weibull_scale = j.value("weibull_scale", c.weibull_scale);
    c.wind_autocorrelation = j.value("wind_autocorrelation", c.wind_autocorrelation);
    c.seed = j.value("seed", c.seed);
    if (j.contains("start")) c.start = parse_timestamp(j.at("start").get<std::string>());
    c.cadence = std::chrono::seconds{j.value("cadence_seconds", c.cadence.count())};
    for (const auto& f : j.value("faults", nlohmann::json::array())) {
      FaultSpec s;
      s.unit = f.value("unit", std::size_t{0});
      s.start_row = f.at("start_row").get<std::int64_t>();
      if (f.contains("end_row")) {
        s.duration_rows = f.at("end_row").get<std::int64_t>() - s.start_row;
      } else {
        s.duration_rows = f.at("duration_rows").get<std::int64_t>();
      }
      s.type = fault_type_from_name(f.value("type", std::string("power_shift")));
      s.shift_sigmas = f.value("shift_sigmas", s.shift_sigmas);
      s.outage_rows = f.value("outage_rows", s.outage_rows);
      c.faults.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("sim", std::string("bad simulation config: ") + e.what());
  }
  return c;
}

SimulatedFleet simulate_fleet(const SimConfig& config) {
  config.validate();
  SimulatedFleet fleet;
  fleet.schema = data::ScadaSchema::default_set();
  for (std::size_t u = 0; u < config.n_units; ++u) {
    const std::string unit_id = "unit_" + std::to_string(u + 1);
    Generated g = generate_unit(config, unit_curve(config, u), config.rows_for(u),
                                mix_seed(config.seed, u), config.start, unit_id);
    const auto n = static_cast<std::int64_t>(config.rows_for(u));
    const auto ts = [&](std::int64_t row) { return config.start + config.cadence * row; };
    for (const auto& f : config.faults) {
      if (f.unit != u) continue;
      const std::int64_t end = f.start_row + f.duration_rows;
      switch (f.type) {
        case FaultType::power_shift: {
          for (std::int64_t r = f.start_row; r < end; ++r) {
            g.raw.power[r] += f.shift_sigmas * g.truth.sigma[r];
            g.raw.status[static_cast<std::size_t>(r)] = RowStatus::pre_outage_window;
          }
          const std::int64_t outage_end = std::min(n, end + f.outage_rows);
          for (std::int64_t r = end; r < outage_end; ++r) {
            g.raw.power[r] = 0.0;
            g.raw.status[static_cast<std::size_t>(r)] = RowStatus::forced_outage;
          }
          fleet.events.push_back({unit_id, ts(end),
                                  ts(end + std::max<std::int64_t>(f.outage_rows, 1) - 1),
                                  data::EventCategory::forced_outage});
          break;
        }
        case FaultType::standby:
        case FaultType::stop:
        case FaultType::warning: {
          const auto category = f.type == FaultType::standby ? data::EventCategory::standby
                                : f.type == FaultType::stop  ? data::EventCategory::stop
                                                             : data::EventCategory::warning;
          const auto status = f.type == FaultType::standby ? RowStatus::standby
                              : f.type == FaultType::stop  ? RowStatus::stop
                                                           : RowStatus::warning;
          for (std::int64_t r = f.start_row; r < end; ++r) {
            if (f.type != FaultType::warning) g.raw.power[r] = 0.0;
            g.raw.status[static_cast<std::size_t>(r)] = status;
          }
          fleet.events.push_back({unit_id, ts(f.start_row), ts(end - 1), category});
          break;
        }
      }
    }
    fleet.units.push_back(data::engineer(g.raw, fleet.schema));
    fleet.raw.push_back(std::move(g.raw));
    fleet.truth.push_back(std::move(g.truth));
  }
  std::stable_sort(fleet.events.begin(), fleet.events.end(),
                   [](const data::Event& a, const data::Event& b) { return a.start < b.start; });
  return fleet;
}

std::vector<SimulatedWindow> simulate_windows(const SimConfig& base, const WindowCorpusConfig& cfg) {
  base.validate();
  if (cfg.length == 0) throw ConfigError("sim", "window length must be positive");
  const PowerCurve curve = unit_curve(base, 0);
  std::mt19937_64 rng(mix_seed(cfg.seed, 77));
  std::vector<SimulatedWindow> out;
  const std::size_t total = cfg.healthy + cfg.faulty;
  // Windows sit 30 days apart, after the base simulation period.
  const Timestamp first =
      base.start + base.cadence * static_cast<std::int64_t>(base.rows_for(0)) +
      std::chrono::days{30};
  for (std::size_t w = 0; w < total; ++w) {
    const bool faulty = w >= cfg.healthy;
    SimulatedWindow win;
    win.faulty = faulty;
    win.id = (faulty ? "faulty_" : "healthy_") +
             std::to_string(faulty ? w - cfg.healthy + 1 : w + 1);
    const Timestamp start = first + std::chrono::days{30} * static_cast<std::int64_t>(w);
    Generated g = generate_unit(base, curve, cfg.length, mix_seed(cfg.seed, 5000 + w), start, "unit_1");
    win.fault_onset = start + base.cadence * static_cast<std::int64_t>(cfg.length);
    if (faulty) {
      std::uniform_int_distribution<std::size_t> onset(0, (cfg.length - 1) / 2);
      const auto shift_start = static_cast<Index>(onset(rng));
      for (Index r = shift_start; r < static_cast<Index>(cfg.length); ++r) {
        g.raw.power[r] += cfg.shift_sigmas * g.truth.sigma[r];
        g.raw.status[static_cast<std::size_t>(r)] = RowStatus::pre_outage_window;
      }
    }
    win.dataset = data::engineer(g.raw, data::ScadaSchema::default_set());
    win.raw = std::move(g.raw);
    win.truth = std::move(g.truth);
    out.push_back(std::move(win));
  }
  return out;
}

}  // namespace fleetcm::sim
