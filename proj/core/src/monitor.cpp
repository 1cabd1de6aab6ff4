#include "fleetcm/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "fleetcm/csv.hpp"
#include "fleetcm/errors.hpp"

namespace fleetcm::monitor {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

NoticeStats summarize(std::vector<double> values) {
  NoticeStats s;
  s.count = values.size();
  std::sort(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  return s;
}

std::string label_name(WindowLabel l) { return l == WindowLabel::faulty ? "faulty" : "healthy"; }

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string optional_field(const std::optional<double>& v) {
  return v ? csv::format_number(*v) : std::string();
}

}  // namespace

void MonitorConfig::validate() const {
  if (!(allowance_k > 0.0) || !(decision_interval > 0.0) || window_length == 0) {
    throw ConfigError("monitor", "allowance k, decision interval I and window length T must "
                                 "all be positive");
  }
}

nlohmann::json MonitorConfig::to_json() const {
  return {{"allowance_k", allowance_k},
          {"decision_interval", decision_interval},
          {"window_length", window_length}};
}

MonitorConfig MonitorConfig::from_json(const nlohmann::json& j) { return from_json(j, MonitorConfig{}); }

MonitorConfig MonitorConfig::from_json(const nlohmann::json& j, MonitorConfig d) {
  try {
    d.allowance_k = j.value("allowance_k", d.allowance_k);
    d.decision_interval = j.value("decision_interval", d.decision_interval);
    d.window_length = j.value("window_length", d.window_length);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("monitor", std::string("bad monitor config: ") + e.what());
  }
  d.validate();
  return d;
}

nlohmann::json CusumState::to_json() const {
  return {{"s_high", s_high},
          {"s_low", s_low},
          {"a_high", a_high},
          {"a_low", a_low},
          {"t", t},
          {"alarmed_at", alarmed_at ? nlohmann::json(*alarmed_at) : nlohmann::json(nullptr)}};
}

CusumState CusumState::from_json(const nlohmann::json& j) {
  CusumState s;
  s.s_high = j.at("s_high").get<double>();
  s.s_low = j.at("s_low").get<double>();
  s.a_high = j.at("a_high").get<double>();
  s.a_low = j.at("a_low").get<double>();
  s.t = j.at("t").get<std::size_t>();
  if (!j.at("alarmed_at").is_null()) s.alarmed_at = j.at("alarmed_at").get<std::size_t>();
  return s;
}

double standardize(double y, const model::GaussianPrediction& pred) {
  if (!(pred.stddev > 0.0)) {
    throw DomainError("monitor", "predictive stddev must be positive");
  }
  return (y - pred.mean) / pred.stddev;
}

CusumState cusum_step(CusumState s, double v, const MonitorConfig& config) {
  s.s_high = std::max(0.0, v - config.allowance_k + s.s_high);
  s.s_low = std::max(0.0, -config.allowance_k - v + s.s_low);
  s.a_high = std::max(s.a_high, s.s_high);
  s.a_low = std::max(s.a_low, s.s_low);
  s.t += 1;
  if (!s.alarmed_at && std::max(s.s_high, s.s_low) > config.decision_interval) {
    s.alarmed_at = s.t;
  }
  return s;
}

WindowRun run_window(std::span<const double> v, const MonitorConfig& config) {
  if (v.empty()) throw DomainError("monitor", "run_window needs a non-empty series");
  WindowRun run;
  run.trace.reserve(v.size());
  CusumState s;
  for (double x : v) {
    s = cusum_step(s, x, config);
    run.trace.push_back({s.s_high, s.s_low, s.statistic()});
  }
  run.alarm = s.alarmed_at.has_value();
  run.alarm_index = s.alarmed_at;
  return run;
}

void write_trace_csv(std::ostream& out, const WindowRun& run, const MonitorConfig& config) {
  out << "t,s_high,neg_s_low,I,neg_I\n";
  const std::string upper = csv::format_number(config.decision_interval);
  const std::string lower = csv::format_number(-config.decision_interval);
  for (std::size_t i = 0; i < run.trace.size(); ++i) {
    out << i + 1 << ',' << csv::format_number(run.trace[i].s_high) << ','
        << csv::format_number(-run.trace[i].s_low) << ',' << upper << ',' << lower << '\n';
  }
}

// ---------------------------------------------------------------------------

nlohmann::json Classification::to_json() const {
  nlohmann::json verdicts_json = nlohmann::json::array();
  for (const auto& v : verdicts) {
    verdicts_json.push_back(
        {{"id", v.id},
         {"label", label_name(v.label)},
         {"alarm", v.alarm},
         {"alarm_index", v.alarm_index ? nlohmann::json(*v.alarm_index) : nlohmann::json(nullptr)},
         {"alarm_time",
          v.alarm_time ? nlohmann::json(format_timestamp(*v.alarm_time)) : nlohmann::json(nullptr)},
         {"notice_time_hours", optional_json(v.notice_time_hours)},
         {"late_alarm", v.late_alarm}});
  }
  nlohmann::json notice_json = nullptr;
  if (notice) {
    notice_json = {{"count", notice->count}, {"mean", notice->mean},     {"std", notice->stddev},
                   {"q1", notice->q1},       {"median", notice->median}, {"q3", notice->q3}};
  }
  return {{"tp", tp},
          {"fp", fp},
          {"fn", fn},
          {"tn", tn},
          {"precision", optional_json(precision)},
          {"recall", optional_json(recall)},
          {"notice_time_hours", notice_json},
          {"windows", verdicts_json}};
}

Classification classify_windows(std::span<const LabeledWindow> windows, const MonitorConfig& config,
                                std::chrono::seconds cadence) {
  config.validate();
  Classification c;
  std::vector<double> notices;
  for (const auto& w : windows) {
    if (!w.timestamps.empty() && w.timestamps.size() != w.v.size()) {
      throw ShapeError("monitor", "window " + w.id + ": timestamps and residuals differ in length");
    }
    const WindowRun run = run_window(w.v, config);
    WindowVerdict verdict;
    verdict.id = w.id;
    verdict.label = w.label;
    verdict.alarm = run.alarm;
    verdict.alarm_index = run.alarm_index;
    if (run.alarm) {
      const std::size_t idx = *run.alarm_index - 1;
      const Timestamp origin{};
      const Timestamp alarm_time = w.timestamps.empty()
                                       ? origin + cadence * static_cast<std::int64_t>(idx)
                                       : w.timestamps[idx];
      verdict.alarm_time = alarm_time;
      if (w.label == WindowLabel::faulty) {
        const Timestamp onset =
            w.fault_onset.value_or(w.timestamps.empty()
                                       ? origin + cadence * static_cast<std::int64_t>(w.v.size())
                                       : w.timestamps.back() + cadence);
        double hours = hours_between(alarm_time, onset);
        if (hours < 0.0) {
          verdict.late_alarm = true;
          hours = 0.0;
        }
        verdict.notice_time_hours = hours;
        notices.push_back(hours);
      }
    }
    if (w.label == WindowLabel::faulty) {
      (run.alarm ? c.tp : c.fn) += 1;
    } else {
      (run.alarm ? c.fp : c.tn) += 1;
    }
    c.verdicts.push_back(std::move(verdict));
  }
  if (c.tp + c.fp > 0) c.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) c.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (!notices.empty()) c.notice = summarize(std::move(notices));
  return c;
}

std::vector<SweepRow> sweep_decision_interval(std::span<const LabeledWindow> windows,
                                              double allowance_k, std::vector<double> grid,
                                              std::chrono::seconds cadence) {
  std::sort(grid.begin(), grid.end());
  std::vector<SweepRow> rows;
  for (double interval : grid) {
    MonitorConfig cfg;
    cfg.allowance_k = allowance_k;
    cfg.decision_interval = interval;
    rows.push_back({interval, classify_windows(windows, cfg, cadence)});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "I,precision,recall,tp,fp,fn,tn,notice_mean_h,notice_std_h,notice_q1_h,"
         "notice_median_h,notice_q3_h\n";
  for (const auto& r : rows) {
    const auto& c = r.result;
    out << csv::format_number(r.decision_interval) << ',' << optional_field(c.precision) << ','
        << optional_field(c.recall) << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << c.tn;
    if (c.notice) {
      out << ',' << csv::format_number(c.notice->mean) << ',' << csv::format_number(c.notice->stddev)
          << ',' << csv::format_number(c.notice->q1) << ',' << csv::format_number(c.notice->median)
          << ',' << csv::format_number(c.notice->q3);
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

std::string to_string(Side s) { return s == Side::high ? "high" : "low"; }

nlohmann::json AlarmEvent::to_json() const {
  return {{"unit", unit},
          {"timestamp", format_timestamp(timestamp)},
          {"side", to_string(side)},
          {"statistic", statistic},
          {"step", step}};
}

CusumChart::CusumChart(std::string unit, MonitorConfig config, ChartMode mode,
                       bool auto_acknowledge, std::chrono::seconds cadence)
    : unit_(std::move(unit)),
      config_(config),
      mode_(mode),
      auto_acknowledge_(auto_acknowledge),
      cadence_(cadence) {
  config_.validate();
}

std::optional<AlarmEvent> CusumChart::update(Timestamp ts, double v) {
  if (last_) {
    if (ts <= *last_) {
      throw DataError("monitor", "unit " + unit_ + ": sample at " + format_timestamp(ts) +
                                     " is not after " + format_timestamp(*last_));
    }
    if (ts - *last_ > cadence_) ++gaps_;
  }
  last_ = ts;
  if (mode_ == ChartMode::window && state_.t == config_.window_length) {
    state_ = CusumState{};
    ++window_;
  }
  const bool was_alarmed = state_.alarmed_at.has_value();
  state_ = cusum_step(state_, v, config_);
  if (was_alarmed || !state_.alarmed_at) return std::nullopt;

  AlarmEvent e;
  e.unit = unit_;
  e.timestamp = ts;
  e.side = state_.s_high >= state_.s_low ? Side::high : Side::low;
  e.statistic = std::max(state_.s_high, state_.s_low);
  e.step = state_.t;
  if (mode_ == ChartMode::continuous && auto_acknowledge_) acknowledge();
  return e;
}

void CusumChart::acknowledge() { state_ = CusumState{}; }

nlohmann::json CusumChart::to_json() const {
  return {{"unit", unit_},
          {"config", config_.to_json()},
          {"mode", mode_ == ChartMode::window ? "window" : "continuous"},
          {"auto_acknowledge", auto_acknowledge_},
          {"cadence_seconds", cadence_.count()},
          {"state", state_.to_json()},
          {"last", last_ ? nlohmann::json(format_timestamp(*last_)) : nlohmann::json(nullptr)},
          {"gaps", gaps_},
          {"window", window_}};
}

CusumChart CusumChart::from_json(const nlohmann::json& j) {
  try {
    CusumChart c(j.at("unit").get<std::string>(), MonitorConfig::from_json(j.at("config")),
                 j.at("mode").get<std::string>() == "window" ? ChartMode::window
                                                             : ChartMode::continuous,
                 j.at("auto_acknowledge").get<bool>(),
                 std::chrono::seconds{j.at("cadence_seconds").get<std::int64_t>()});
    c.state_ = CusumState::from_json(j.at("state"));
    if (!j.at("last").is_null()) c.last_ = parse_timestamp(j.at("last").get<std::string>());
    c.gaps_ = j.at("gaps").get<std::size_t>();
    c.window_ = j.at("window").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("monitor", std::string("bad chart checkpoint: ") + e.what());
  }
}

}  // namespace fleetcm::monitor
