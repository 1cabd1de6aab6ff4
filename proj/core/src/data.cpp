#include "fleetcm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "fleetcm/csv.hpp"
#include "fleetcm/errors.hpp"

namespace fleetcm::data {

namespace {

constexpr std::size_t kMaxReportedProblems = 20;

const std::vector<std::string> kDatasetPrefix = {"timestamp", "unit_id", "status", "power_kw"};

// Table order of the default feature set; the three wind-direction angles are
// expanded into sine/cosine pairs during engineering.
const std::vector<std::string> kScalarFeatures = {
    "wind_speed_avg",          "wind_speed_std",          "wind_speed_min",
    "wind_speed_max",          "rear_bearing_temp_avg",   "rear_bearing_temp_std",
    "rear_bearing_temp_min",   "rear_bearing_temp_max",   "transformer_temp_avg",
    "gear_oil_inlet_temp_avg", "top_box_temp_avg",        "conv_ambient_temp_avg",
    "motor_axis1_temp_avg",    "cpu_temp_avg",            "blade_pitch_b_avg",
    "gear_oil_inlet_press_avg", "tower_acc_x",            "front_bearing_temp_avg",
    "front_bearing_temp_std",  "front_bearing_temp_min",  "front_bearing_temp_max",
    "rotor_bearing_temp_avg",  "stator1_temp_avg",        "nacelle_ambient_temp_avg",
    "nacelle_temp_avg",        "gear_oil_temp_avg",       "drive_train_acc_avg",
    "hub_temp_avg",            "transformer_cell_temp_avg", "motor_axis2_temp_avg",
    "blade_pitch_a_avg",       "blade_pitch_c_avg",       "gear_oil_pump_press_avg",
    "tower_acc_y"};

double wrap_degrees(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  return r;
}

std::string join_problem(std::size_t line_no, const std::string& why) {
  return "line " + std::to_string(line_no) + ": " + why;
}

}  // namespace

// ---------------------------------------------------------------------------
// Enums

std::string to_string(RowStatus s) {
  switch (s) {
    case RowStatus::normal: return "normal";
    case RowStatus::standby: return "standby";
    case RowStatus::warning: return "warning";
    case RowStatus::stop: return "stop";
    case RowStatus::forced_outage: return "forced_outage";
    case RowStatus::pre_outage_window: return "pre_outage_window";
  }
  return "normal";
}

RowStatus row_status_from_string(const std::string& s) {
  for (RowStatus r : {RowStatus::normal, RowStatus::standby, RowStatus::warning, RowStatus::stop,
                      RowStatus::forced_outage, RowStatus::pre_outage_window}) {
    if (to_string(r) == s) return r;
  }
  throw DataError("data", "unknown row status '" + s + "'");
}

std::string to_string(EventCategory c) {
  switch (c) {
    case EventCategory::standby: return "standby";
    case EventCategory::warning: return "warning";
    case EventCategory::stop: return "stop";
    case EventCategory::forced_outage: return "forced_outage";
  }
  return "standby";
}

EventCategory event_category_from_string(const std::string& s) {
  for (EventCategory c : {EventCategory::standby, EventCategory::warning, EventCategory::stop,
                          EventCategory::forced_outage}) {
    if (to_string(c) == s) return c;
  }
  throw DataError("data", "unknown event category '" + s + "'");
}

// ---------------------------------------------------------------------------
// TurbineDataset

void TurbineDataset::validate() const {
  const auto n = static_cast<Index>(timestamps.size());
  if (features.rows() != n || target_power.size() != n ||
      row_status.size() != timestamps.size()) {
    throw DataError("data", "unit " + unit_id + ": row counts of features, targets and "
                                                "status disagree");
  }
  if (static_cast<Index>(feature_names.size()) != features.cols()) {
    throw DataError("data", "unit " + unit_id + ": feature names do not match columns");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] <= timestamps[i - 1]) {
      throw DataError("data", "unit " + unit_id + ": timestamps not strictly increasing at " +
                                  format_timestamp(timestamps[i]));
    }
  }
}

TurbineDataset TurbineDataset::select(const std::vector<std::size_t>& rows) const {
  TurbineDataset out;
  out.unit_id = unit_id;
  out.feature_names = feature_names;
  out.features.resize(static_cast<Index>(rows.size()), features.cols());
  out.target_power.resize(static_cast<Index>(rows.size()));
  out.timestamps.reserve(rows.size());
  out.row_status.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Index>(rows[i]);
    out.features.row(static_cast<Index>(i)) = features.row(r);
    out.target_power[static_cast<Index>(i)] = target_power[r];
    out.timestamps.push_back(timestamps[rows[i]]);
    out.row_status.push_back(row_status[rows[i]]);
  }
  return out;
}

TurbineDataset concatenate(const std::vector<TurbineDataset>& parts) {
  if (parts.empty()) {
    throw ConfigError("data", "nothing to concatenate");
  }
  TurbineDataset out;
  out.unit_id = parts.front().unit_id;
  out.feature_names = parts.front().feature_names;
  Index total = 0;
  for (const auto& p : parts) {
    if (p.feature_names != out.feature_names) {
      throw ConfigError("data", "feature schema of unit " + p.unit_id +
                                    " differs from unit " + out.unit_id);
    }
    total += static_cast<Index>(p.size());
    if (&p != &parts.front()) out.unit_id += "+" + p.unit_id;
  }
  out.features.resize(total, static_cast<Index>(out.feature_names.size()));
  out.target_power.resize(total);
  Index off = 0;
  for (const auto& p : parts) {
    const auto n = static_cast<Index>(p.size());
    out.features.middleRows(off, n) = p.features;
    out.target_power.segment(off, n) = p.target_power;
    out.timestamps.insert(out.timestamps.end(), p.timestamps.begin(), p.timestamps.end());
    out.row_status.insert(out.row_status.end(), p.row_status.begin(), p.row_status.end());
    off += n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Events

EventLog read_events_csv(std::istream& in) {
  std::string line;
  if (!csv::next_line(in, line)) return {};
  const auto header = csv::split_line(line);
  const std::vector<std::string> expected = {"unit_id", "start", "end", "category"};
  if (header != expected) {
    throw SchemaError("data", "events file must have header unit_id,start,end,category");
  }
  EventLog events;
  std::size_t line_no = 1;
  while (csv::next_line(in, line)) {
    ++line_no;
    const auto f = csv::split_line(line);
    if (f.size() != 4) {
      throw DataError("data", "events " + join_problem(line_no, "expected 4 fields"));
    }
    Event e{f[0], parse_timestamp(f[1]), parse_timestamp(f[2]), event_category_from_string(f[3])};
    if (e.end < e.start) {
      throw DataError("data", "events " + join_problem(line_no, "end before start"));
    }
    events.push_back(std::move(e));
  }
  return events;
}

EventLog read_events_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("data", "cannot open events file " + path.string());
  return read_events_csv(in);
}

void write_events_csv(std::ostream& out, const EventLog& events) {
  out << "unit_id,start,end,category\n";
  for (const auto& e : events) {
    out << csv::escape(e.unit_id) << ',' << format_timestamp(e.start) << ','
        << format_timestamp(e.end) << ',' << to_string(e.category) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Schema

ScadaSchema ScadaSchema::default_set() {
  ScadaSchema s;
  for (const auto& name : kScalarFeatures) {
    s.features.push_back({name, name, FeatureKind::scalar});
  }
  for (const char* name : {"wind_dir_avg", "wind_dir_max", "wind_dir_min"}) {
    s.features.push_back({name, name, FeatureKind::angle});
  }
  s.features.push_back({"wind_dir_std", "wind_dir_std", FeatureKind::scalar});
  return s;
}

std::vector<std::string> ScadaSchema::engineered_names() const {
  std::vector<std::string> names;
  for (const auto& f : features) {
    if (f.kind == FeatureKind::angle) {
      names.push_back("sin_" + f.name);
      names.push_back("cos_" + f.name);
    } else {
      names.push_back(f.name);
    }
  }
  return names;
}

Index ScadaSchema::engineered_width() const {
  return static_cast<Index>(engineered_names().size());
}

nlohmann::json ScadaSchema::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features) {
    feats.push_back({{"name", f.name},
                     {"column", f.column},
                     {"kind", f.kind == FeatureKind::angle ? "angle" : "scalar"}});
  }
  return {{"version", 1},
          {"timestamp_column", timestamp_column},
          {"power_column", power_column},
          {"features", feats}};
}

ScadaSchema ScadaSchema::from_json(const nlohmann::json& j) {
  try {
    ScadaSchema s;
    s.timestamp_column = j.value("timestamp_column", std::string("timestamp"));
    s.power_column = j.value("power_column", std::string("power_kw"));
    if (j.contains("features")) {
      for (const auto& f : j.at("features")) {
        FeatureColumn c;
        c.name = f.at("name").get<std::string>();
        c.column = f.value("column", c.name);
        const std::string kind = f.value("kind", std::string("scalar"));
        if (kind != "scalar" && kind != "angle") {
          throw ConfigError("data", "feature " + c.name + ": kind must be scalar or angle");
        }
        c.kind = kind == "angle" ? FeatureKind::angle : FeatureKind::scalar;
        s.features.push_back(std::move(c));
      }
    } else {
      // Column renames over the default feature set.
      s.features = default_set().features;
      if (j.contains("columns")) {
        for (auto& f : s.features) {
          f.column = j.at("columns").value(f.name, f.column);
        }
      }
    }
    if (s.features.empty()) {
      throw ConfigError("data", "schema lists no features");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("data", std::string("bad schema document: ") + e.what());
  }
}

ScadaSchema ScadaSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("data", "cannot open schema file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("data", "schema file " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Engineering and ingestion

TurbineDataset engineer(const ScadaTable& table, const ScadaSchema& schema) {
  const auto n = static_cast<Index>(table.timestamps.size());
  if (table.values.cols() != static_cast<Index>(schema.features.size()) ||
      table.values.rows() != n || table.power.size() != n) {
    throw ShapeError("data", "raw table does not match schema");
  }
  TurbineDataset ds;
  ds.unit_id = table.unit_id;
  ds.timestamps = table.timestamps;
  ds.feature_names = schema.engineered_names();
  ds.features.resize(n, static_cast<Index>(ds.feature_names.size()));
  ds.target_power = table.power;
  ds.row_status = table.status.empty() ? std::vector<RowStatus>(table.timestamps.size(),
                                                                RowStatus::normal)
                                       : table.status;
  for (Index r = 0; r < n; ++r) {
    Index out = 0;
    for (std::size_t c = 0; c < schema.features.size(); ++c) {
      const double v = table.values(r, static_cast<Index>(c));
      if (schema.features[c].kind == FeatureKind::angle) {
        const double rad = wrap_degrees(v) * std::numbers::pi / 180.0;
        ds.features(r, out++) = std::sin(rad);
        ds.features(r, out++) = std::cos(rad);
      } else {
        ds.features(r, out++) = v;
      }
    }
  }
  return ds;
}

void write_scada_csv(std::ostream& out, const ScadaTable& table, const ScadaSchema& schema) {
  out << csv::escape(schema.timestamp_column) << ',' << csv::escape(schema.power_column);
  for (const auto& f : schema.features) out << ',' << csv::escape(f.column);
  out << '\n';
  for (Index r = 0; r < table.values.rows(); ++r) {
    out << format_timestamp(table.timestamps[static_cast<std::size_t>(r)]) << ','
        << csv::format_number(table.power[r]);
    for (Index c = 0; c < table.values.cols(); ++c) {
      out << ',' << csv::format_number(table.values(r, c));
    }
    out << '\n';
  }
}

nlohmann::json IngestReport::to_json() const {
  return {{"rows_read", rows_read},
          {"rows_kept", rows_kept},
          {"dropped_missing", dropped_missing},
          {"skipped_unparseable", skipped_unparseable},
          {"problems", problems}};
}

IngestResult ingest(std::istream& in, const ScadaSchema& schema, const std::string& unit_id) {
  std::string line;
  if (!csv::next_line(in, line)) {
    throw DataError("data", "empty SCADA file");
  }
  const auto header = csv::split_line(line);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(header[i], i);
  const auto column = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw SchemaError("data", "missing column '" + name + "'");
    return it->second;
  };
  const std::size_t ts_col = column(schema.timestamp_column);
  const std::size_t power_col = column(schema.power_column);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features) feature_cols.push_back(column(f.column));

  IngestReport report;
  std::vector<Timestamp> stamps;
  std::vector<double> power;
  std::vector<double> values;
  const auto note = [&](std::size_t line_no, const std::string& why) {
    if (report.problems.size() < kMaxReportedProblems) {
      report.problems.push_back(join_problem(line_no, why));
    }
  };

  std::size_t line_no = 1;
  std::vector<double> row(schema.features.size());
  while (csv::next_line(in, line)) {
    ++line_no;
    ++report.rows_read;
    const auto fields = csv::split_line(line);
    if (fields.size() < header.size()) {
      ++report.skipped_unparseable;
      note(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
      continue;
    }
    try {
      const Timestamp ts = parse_timestamp(fields[ts_col]);
      const auto p = csv::parse_number(fields[power_col]);
      bool missing = !p.has_value();
      for (std::size_t c = 0; c < feature_cols.size() && !missing; ++c) {
        const auto v = csv::parse_number(fields[feature_cols[c]]);
        if (!v) {
          missing = true;
        } else {
          row[c] = *v;
        }
      }
      if (missing) {
        ++report.dropped_missing;
        continue;
      }
      stamps.push_back(ts);
      power.push_back(*p);
      values.insert(values.end(), row.begin(), row.end());
    } catch (const DataError& e) {
      ++report.skipped_unparseable;
      note(line_no, e.what());
    }
  }

  ScadaTable table;
  table.unit_id = unit_id;
  table.timestamps = std::move(stamps);
  const auto n = static_cast<Index>(table.timestamps.size());
  const auto c = static_cast<Index>(schema.features.size());
  table.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(values.data(), n, c);
  table.power = Eigen::Map<const Vector>(power.data(), n);
  IngestResult result{engineer(table, schema), report};
  result.report.rows_kept = result.dataset.size();
  result.dataset.validate();
  return result;
}

IngestResult ingest(const std::filesystem::path& csv_path, const ScadaSchema& schema,
                    const std::string& unit_id) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("data", "cannot open " + csv_path.string());
  return ingest(in, schema, unit_id);
}

bool is_dataset_header(const std::string& header_line) {
  const auto h = csv::split_line(header_line);
  return h.size() >= kDatasetPrefix.size() &&
         std::equal(kDatasetPrefix.begin(), kDatasetPrefix.end(), h.begin());
}

void write_dataset_csv(std::ostream& out, const TurbineDataset& ds) {
  for (std::size_t i = 0; i < kDatasetPrefix.size(); ++i) {
    out << (i ? "," : "") << kDatasetPrefix[i];
  }
  for (const auto& name : ds.feature_names) out << ',' << csv::escape(name);
  out << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto ri = static_cast<Index>(r);
    out << format_timestamp(ds.timestamps[r]) << ',' << csv::escape(ds.unit_id) << ','
        << to_string(ds.row_status[r]) << ',' << csv::format_number(ds.target_power[ri]);
    for (Index c = 0; c < ds.features.cols(); ++c) {
      out << ',' << csv::format_number(ds.features(ri, c));
    }
    out << '\n';
  }
}

TurbineDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!csv::next_line(in, line) || !is_dataset_header(line)) {
    throw SchemaError("data", "dataset file must start with timestamp,unit_id,status,power_kw");
  }
  const auto header = csv::split_line(line);
  TurbineDataset ds;
  ds.feature_names.assign(header.begin() + static_cast<std::ptrdiff_t>(kDatasetPrefix.size()),
                          header.end());
  const std::size_t width = ds.feature_names.size();
  std::vector<double> values;
  std::vector<double> power;
  std::size_t line_no = 1;
  while (csv::next_line(in, line)) {
    ++line_no;
    const auto f = csv::split_line(line);
    if (f.size() != header.size()) {
      throw DataError("data", "dataset " + join_problem(line_no, "wrong field count"));
    }
    ds.timestamps.push_back(parse_timestamp(f[0]));
    if (ds.unit_id.empty()) ds.unit_id = f[1];
    ds.row_status.push_back(row_status_from_string(f[2]));
    const auto p = csv::parse_number(f[3]);
    if (!p) throw DataError("data", "dataset " + join_problem(line_no, "missing power"));
    power.push_back(*p);
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = csv::parse_number(f[kDatasetPrefix.size() + c]);
      if (!v) throw DataError("data", "dataset " + join_problem(line_no, "missing feature"));
      values.push_back(*v);
    }
  }
  const auto n = static_cast<Index>(ds.timestamps.size());
  ds.features = Eigen::Map<const FeatureMatrix>(values.data(), n, static_cast<Index>(width));
  ds.target_power = Eigen::Map<const Vector>(power.data(), n);
  ds.validate();
  return ds;
}

TurbineDataset load_dataset(const std::filesystem::path& path, const ScadaSchema& schema,
                            const std::string& unit_id) {
  std::ifstream in(path);
  if (!in) throw DataError("data", "cannot open " + path.string());
  std::string first;
  std::getline(in, first);
  if (!first.empty() && first.back() == '\r') first.pop_back();
  in.seekg(0);
  if (is_dataset_header(first)) {
    TurbineDataset ds = read_dataset_csv(in);
    if (!unit_id.empty()) ds.unit_id = unit_id;
    return ds;
  }
  return ingest(in, schema, unit_id.empty() ? path.stem().string() : unit_id).dataset;
}

// ---------------------------------------------------------------------------
// Filtering

nlohmann::json FilterReport::to_json() const {
  return {{"rows_in", rows_in},
          {"rows_out", rows_out},
          {"removed", removed},
          {"empty_result", empty_result}};
}

FilterResult filter_events(const TurbineDataset& dataset, const EventLog& events,
                           double pre_outage_days, std::chrono::seconds cadence) {
  const auto pre_window = std::chrono::duration_cast<std::chrono::seconds>(
      std::chrono::duration<double, std::ratio<86400>>(pre_outage_days));
  FilterReport report;
  report.rows_in = dataset.size();
  for (const char* key : {"standby", "warning", "stop", "forced_outage", "pre_outage_window"}) {
    report.removed[key] = 0;
  }

  std::vector<const Event*> relevant;
  for (const auto& e : events) {
    if (e.unit_id == dataset.unit_id) relevant.push_back(&e);
  }

  std::vector<std::size_t> keep;
  keep.reserve(dataset.size());
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const Timestamp t = dataset.timestamps[r];
    std::optional<std::string> reason;
    for (const Event* e : relevant) {
      const bool overlaps = t <= e->end && t + cadence > e->start;
      if (overlaps) {
        reason = to_string(e->category);
        break;
      }
      if (e->category == EventCategory::forced_outage && t >= e->start - pre_window &&
          t < e->start) {
        reason = "pre_outage_window";
      }
    }
    if (reason) {
      ++report.removed[*reason];
    } else {
      keep.push_back(r);
    }
  }
  FilterResult result{dataset.select(keep), report};
  result.report.rows_out = keep.size();
  result.report.empty_result = keep.empty();
  return result;
}

// ---------------------------------------------------------------------------
// Normalization

std::vector<std::string> NormalizationStats::output_names() const {
  std::vector<std::string> out;
  for (std::size_t k : kept) out.push_back(input_names[k]);
  return out;
}

nlohmann::json NormalizationStats::to_json() const {
  std::vector<std::string> means;
  std::vector<std::string> sds;
  for (Index i = 0; i < mean.size(); ++i) {
    means.push_back(csv::format_number(mean[i]));
    sds.push_back(csv::format_number(stddev[i]));
  }
  return {{"input_names", input_names},
          {"kept", kept},
          {"dropped", dropped},
          {"mean", means},
          {"stddev", sds}};
}

NormalizationStats NormalizationStats::from_json(const nlohmann::json& j) {
  NormalizationStats s;
  try {
    s.input_names = j.at("input_names").get<std::vector<std::string>>();
    s.kept = j.at("kept").get<std::vector<std::size_t>>();
    s.dropped = j.value("dropped", std::vector<std::string>{});
    const auto means = j.at("mean").get<std::vector<std::string>>();
    const auto sds = j.at("stddev").get<std::vector<std::string>>();
    if (means.size() != s.kept.size() || sds.size() != s.kept.size()) {
      throw DataError("data", "normalization stats have inconsistent lengths");
    }
    s.mean.resize(static_cast<Index>(means.size()));
    s.stddev.resize(static_cast<Index>(sds.size()));
    for (std::size_t i = 0; i < means.size(); ++i) {
      s.mean[static_cast<Index>(i)] = csv::parse_number(means[i]).value();
      s.stddev[static_cast<Index>(i)] = csv::parse_number(sds[i]).value();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("data", std::string("bad normalization stats: ") + e.what());
  } catch (const std::bad_optional_access&) {
    throw DataError("data", "normalization stats contain missing values");
  }
  for (std::size_t k : s.kept) {
    if (k >= s.input_names.size()) throw DataError("data", "normalization index out of range");
  }
  return s;
}

NormalizationStats fit_normalization(const TurbineDataset& train, ZeroVariancePolicy policy) {
  if (train.empty()) {
    throw DataError("data", "cannot fit normalization on an empty training set");
  }
  NormalizationStats stats;
  stats.input_names = train.feature_names;
  const auto n = static_cast<double>(train.size());
  std::vector<double> means;
  std::vector<double> sds;
  for (Index c = 0; c < train.features.cols(); ++c) {
    const auto col = train.features.col(c);
    const double m = col.sum() / n;
    const double var = (col.array() - m).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * (1.0 + std::abs(m)))) {
      const std::string& name = train.feature_names[static_cast<std::size_t>(c)];
      if (policy == ZeroVariancePolicy::error) {
        throw DataError("data", "feature '" + name + "' has zero variance on the training split");
      }
      stats.dropped.push_back(name);
      continue;
    }
    stats.kept.push_back(static_cast<std::size_t>(c));
    means.push_back(m);
    sds.push_back(sd);
  }
  stats.mean = Eigen::Map<const Vector>(means.data(), static_cast<Index>(means.size()));
  stats.stddev = Eigen::Map<const Vector>(sds.data(), static_cast<Index>(sds.size()));
  return stats;
}

TurbineDataset apply_normalization(const TurbineDataset& dataset, const NormalizationStats& stats) {
  if (dataset.feature_names != stats.input_names) {
    throw ConfigError("data", "schema mismatch: dataset features differ from the normalization "
                              "statistics (" +
                                  std::to_string(dataset.feature_names.size()) + " vs " +
                                  std::to_string(stats.input_names.size()) + " columns)");
  }
  TurbineDataset out;
  out.unit_id = dataset.unit_id;
  out.timestamps = dataset.timestamps;
  out.target_power = dataset.target_power;
  out.row_status = dataset.row_status;
  out.feature_names = stats.output_names();
  out.features.resize(static_cast<Index>(dataset.size()), stats.output_width());
  for (Index k = 0; k < stats.output_width(); ++k) {
    const auto src = static_cast<Index>(stats.kept[static_cast<std::size_t>(k)]);
    out.features.col(k) = (dataset.features.col(src).array() - stats.mean[k]) / stats.stddev[k];
  }
  return out;
}

}  // namespace fleetcm::data
