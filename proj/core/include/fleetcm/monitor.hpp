#pragma once

// Two-sided tabular CUSUM over standardized residuals v = (y - mean) / stddev.
//
//   S_H(t) = max(0, v_t - k + S_H(t-1))
//   S_L(t) = max(0, -k - v_t + S_L(t-1)),   S_H(0) = S_L(0) = 0
//
// The chart alarms the first time max(S_H, S_L) strictly exceeds the decision
// interval I. Steps are counted from 1.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fleetcm/model.hpp"
#include "fleetcm/time.hpp"

namespace fleetcm::monitor {

struct MonitorConfig {
  double allowance_k = 0.5;
  double decision_interval = 5.0;
  std::size_t window_length = 432;  // 72 h of 10-minute rows

  void validate() const;
  nlohmann::json to_json() const;
  static MonitorConfig from_json(const nlohmann::json& j);
  static MonitorConfig from_json(const nlohmann::json& j, MonitorConfig defaults);
};

struct CusumState {
  double s_high = 0.0;
  double s_low = 0.0;
  double a_high = 0.0;  // running max of s_high
  double a_low = 0.0;   // running max of s_low
  std::size_t t = 0;
  std::optional<std::size_t> alarmed_at;  // first step with max(S_H, S_L) > I

  double statistic() const { return std::max(a_high, a_low); }

  nlohmann::json to_json() const;
  static CusumState from_json(const nlohmann::json& j);

  friend bool operator==(const CusumState&, const CusumState&) = default;
};

// Throws DomainError if pred.stddev <= 0.
double standardize(double y, const model::GaussianPrediction& pred);

CusumState cusum_step(CusumState state, double v, const MonitorConfig& config);

struct TracePoint {
  double s_high = 0.0;
  double s_low = 0.0;
  double a = 0.0;  // max(A_H, A_L) so far

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

struct WindowRun {
  bool alarm = false;
  std::optional<std::size_t> alarm_index;  // 1-based step
  std::vector<TracePoint> trace;
};

// Folds cusum_step over `v` from a zero state. Throws DomainError if empty.
WindowRun run_window(std::span<const double> v, const MonitorConfig& config);

// Columns: t,s_high,neg_s_low,I,neg_I
void write_trace_csv(std::ostream& out, const WindowRun& run, const MonitorConfig& config);

// ---------------------------------------------------------------------------
// Labeled windows and decision-interval calibration

enum class WindowLabel { healthy, faulty };

struct LabeledWindow {
  std::string id;
  std::vector<double> v;
  WindowLabel label = WindowLabel::healthy;
  // Optional; when empty, step i is taken to happen (i - 1) * cadence after
  // an arbitrary origin and the fault onset defaults to the end of the window.
  std::vector<Timestamp> timestamps;
  std::optional<Timestamp> fault_onset;
};

struct WindowVerdict {
  std::string id;
  WindowLabel label = WindowLabel::healthy;
  bool alarm = false;
  std::optional<std::size_t> alarm_index;
  std::optional<Timestamp> alarm_time;
  std::optional<double> notice_time_hours;  // faulty and alarmed only
  bool late_alarm = false;  // alarm after onset; notice time floored to 0
};

struct NoticeStats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

struct Classification {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::optional<double> precision;  // undefined when TP + FP = 0
  std::optional<double> recall;     // undefined when TP + FN = 0
  std::optional<NoticeStats> notice;
  std::vector<WindowVerdict> verdicts;

  nlohmann::json to_json() const;
};

Classification classify_windows(std::span<const LabeledWindow> windows, const MonitorConfig& config,
                                std::chrono::seconds cadence = kDefaultCadence);

struct SweepRow {
  double decision_interval = 0.0;
  Classification result;
};

// One classification per entry of `grid` (evaluated in ascending order).
std::vector<SweepRow> sweep_decision_interval(std::span<const LabeledWindow> windows,
                                              double allowance_k, std::vector<double> grid,
                                              std::chrono::seconds cadence = kDefaultCadence);

// Columns: I,precision,recall,tp,fp,fn,tn,notice_mean_h,notice_std_h,notice_q1_h,
// notice_median_h,notice_q3_h (empty fields for undefined values).
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

// ---------------------------------------------------------------------------
// Streaming

enum class Side { high, low };
std::string to_string(Side s);

struct AlarmEvent {
  std::string unit;
  Timestamp timestamp{};
  Side side = Side::high;
  double statistic = 0.0;
  std::size_t step = 0;  // step within the current window or run

  nlohmann::json to_json() const;
};

enum class ChartMode {
  window,      // state resets every window_length samples
  continuous,  // state persists; resets only on acknowledge()
};

// Per-unit streaming chart. Missing intervals are skipped without decay and
// counted as gaps.
class CusumChart {
 public:
  CusumChart(std::string unit, MonitorConfig config, ChartMode mode = ChartMode::window,
             bool auto_acknowledge = false, std::chrono::seconds cadence = kDefaultCadence);

  // Returns an event the first time the current window/run crosses I.
  // Throws DataError if `ts` is not after the previous sample.
  std::optional<AlarmEvent> update(Timestamp ts, double v);

  // Clears the statistics (and the latched alarm).
  void acknowledge();

  const CusumState& state() const { return state_; }
  std::size_t gap_count() const { return gaps_; }
  std::size_t window_index() const { return window_; }
  const MonitorConfig& config() const { return config_; }

  nlohmann::json to_json() const;
  static CusumChart from_json(const nlohmann::json& j);

 private:
  std::string unit_;
  MonitorConfig config_;
  ChartMode mode_;
  bool auto_acknowledge_;
  std::chrono::seconds cadence_;
  CusumState state_;
  std::optional<Timestamp> last_;
  std::size_t gaps_ = 0;
  std::size_t window_ = 0;
};

}  // namespace fleetcm::monitor
