#pragma once

// SCADA ingestion, event-based filtering and feature normalization.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fleetcm/time.hpp"

namespace fleetcm::data {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class RowStatus { normal, standby, warning, stop, forced_outage, pre_outage_window };

std::string to_string(RowStatus s);
RowStatus row_status_from_string(const std::string& s);

// One unit's time-indexed feature matrix, target power (kW) and row tags.
struct TurbineDataset {
  std::string unit_id;
  std::vector<Timestamp> timestamps;
  std::vector<std::string> feature_names;
  FeatureMatrix features;  // n x d0
  Vector target_power;     // n, kW
  std::vector<RowStatus> row_status;

  std::size_t size() const { return timestamps.size(); }
  Index width() const { return features.cols(); }
  bool empty() const { return timestamps.empty(); }

  // Row counts agree and timestamps strictly increase. Throws DataError.
  void validate() const;

  // Copy of the listed rows, in the given order.
  TurbineDataset select(const std::vector<std::size_t>& rows) const;
};

// Row-wise concatenation; all parts must share feature names (ConfigError).
// Timestamps are not required to be ordered in the result.
TurbineDataset concatenate(const std::vector<TurbineDataset>& parts);

enum class EventCategory { standby, warning, stop, forced_outage };

std::string to_string(EventCategory c);
EventCategory event_category_from_string(const std::string& s);

struct Event {
  std::string unit_id;
  Timestamp start;
  Timestamp end;
  EventCategory category = EventCategory::standby;
};

using EventLog = std::vector<Event>;

// Columns: unit_id,start,end,category (ISO-8601 UTC timestamps).
EventLog read_events_csv(std::istream& in);
EventLog read_events_csv(const std::filesystem::path& path);
void write_events_csv(std::ostream& out, const EventLog& events);

// ---------------------------------------------------------------------------
// Schema

enum class FeatureKind { scalar, angle };

struct FeatureColumn {
  std::string name;    // logical name
  std::string column;  // header in the CSV
  FeatureKind kind = FeatureKind::scalar;
};

// Maps logical feature names to CSV headers. Angle columns (degrees) become a
// sine and a cosine feature.
struct ScadaSchema {
  std::string timestamp_column = "timestamp";
  std::string power_column = "power_kw";
  std::vector<FeatureColumn> features;

  // The 41-feature SCADA set: 35 scalar columns plus three wind direction
  // angles. Column headers equal the logical names.
  static ScadaSchema default_set();

  std::vector<std::string> engineered_names() const;
  Index engineered_width() const;

  nlohmann::json to_json() const;
  static ScadaSchema from_json(const nlohmann::json& j);
  static ScadaSchema load(const std::filesystem::path& path);
};

// Raw rows in schema order, before the angle transform.
struct ScadaTable {
  std::string unit_id;
  std::vector<Timestamp> timestamps;
  Eigen::MatrixXd values;  // n x schema.features.size()
  Vector power;
  std::vector<RowStatus> status;
};

TurbineDataset engineer(const ScadaTable& table, const ScadaSchema& schema);
void write_scada_csv(std::ostream& out, const ScadaTable& table, const ScadaSchema& schema);

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t dropped_missing = 0;
  std::size_t skipped_unparseable = 0;
  std::vector<std::string> problems;  // first few offending lines

  nlohmann::json to_json() const;
};

struct IngestResult {
  TurbineDataset dataset;
  IngestReport report;
};

// Throws SchemaError naming the first missing column, DataError on
// out-of-order or duplicate timestamps.
IngestResult ingest(std::istream& in, const ScadaSchema& schema, const std::string& unit_id);
IngestResult ingest(const std::filesystem::path& csv_path, const ScadaSchema& schema,
                    const std::string& unit_id);

// Engineered dataset file: timestamp,unit_id,status,power_kw,<features...>
void write_dataset_csv(std::ostream& out, const TurbineDataset& ds);
TurbineDataset read_dataset_csv(std::istream& in);
bool is_dataset_header(const std::string& header_line);

// Reads either an engineered dataset file or a raw SCADA export.
TurbineDataset load_dataset(const std::filesystem::path& path, const ScadaSchema& schema,
                            const std::string& unit_id);

// ---------------------------------------------------------------------------
// Filtering

struct FilterReport {
  std::map<std::string, std::size_t> removed;  // keyed by category name
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
  bool empty_result = false;

  nlohmann::json to_json() const;
};

struct FilterResult {
  TurbineDataset dataset;
  FilterReport report;
};

// Removes rows whose 10-minute interval [t, t + cadence) overlaps a standby,
// warning, stop or forced-outage event, and rows with timestamps in
// [start - pre_outage_days, start) of a forced outage. Events of other units
// are ignored.
FilterResult filter_events(const TurbineDataset& dataset, const EventLog& events,
                           double pre_outage_days = 7.0,
                           std::chrono::seconds cadence = kDefaultCadence);

// ---------------------------------------------------------------------------
// Normalization

enum class ZeroVariancePolicy { drop, error };

struct NormalizationStats {
  std::vector<std::string> input_names;  // names the stats were fitted on
  std::vector<std::size_t> kept;         // indices into input_names
  std::vector<std::string> dropped;      // zero-variance features
  Vector mean;                           // per kept feature
  Vector stddev;                         // per kept feature, > 0

  Index output_width() const { return static_cast<Index>(kept.size()); }
  std::vector<std::string> output_names() const;

  nlohmann::json to_json() const;
  static NormalizationStats from_json(const nlohmann::json& j);
};

// Population mean/stddev per feature on the training split.
NormalizationStats fit_normalization(const TurbineDataset& train,
                                     ZeroVariancePolicy policy = ZeroVariancePolicy::drop);

// z-scores the kept features; target power is left in kW.
TurbineDataset apply_normalization(const TurbineDataset& dataset, const NormalizationStats& stats);

}  // namespace fleetcm::data
