#include <algorithm>
#include <fstream>
#include <map>

#include "commands.hpp"
#include "common.hpp"
#include "fleetcm/bundle.hpp"
#include "fleetcm/csv.hpp"
#include "fleetcm/metrics.hpp"
#include "fleetcm/monitor.hpp"

namespace fleetcm::cli {

namespace {

ModelBundle open_bundle(Run& run, const std::optional<std::string>& flag) {
  const std::string path = required_path(run, "bundle", flag);
  run.input(path);
  return load_bundle(path);
}

std::vector<double> level_list(Run& run, const std::string& key,
                               const std::optional<std::string>& flag,
                               std::vector<double> fallback) {
  if (flag) {
    auto values = parse_number_list(*flag);
    run.setting<std::vector<double>>(key, values, {});
    return values;
  }
  return run.setting<std::vector<double>>(key, std::nullopt, std::move(fallback));
}

bool is_jsonl(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".jsonl" || ext == ".ndjson";
}

// Line-delimited JSON: {"timestamp": ..., "unit_id": ..., "<power column>": ...,
// "<feature column>": ...}. Rows are grouped per unit in arrival order.
std::vector<data::TurbineDataset> read_jsonl_stream(const std::filesystem::path& path,
                                                    const data::ScadaSchema& schema,
                                                    const std::string& default_unit) {
  std::ifstream in(path);
  if (!in) throw DataError("cli", "cannot open " + path.string());
  std::vector<data::ScadaTable> tables;
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<std::vector<double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("cli", path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const auto field = [&](const std::string& name) -> const nlohmann::json& {
      if (!j.contains(name)) {
        throw SchemaError("cli", path.string() + ":" + std::to_string(line_no) +
                                     ": missing field '" + name + "'");
      }
      return j.at(name);
    };
    const auto number = [&](const std::string& name) {
      const auto& v = field(name);
      if (!v.is_number()) {
        throw DataError("cli", path.string() + ":" + std::to_string(line_no) + ": field '" +
                                   name + "' is not a number");
      }
      return v.get<double>();
    };
    std::string unit = default_unit.empty() ? "1" : default_unit;
    if (j.contains("unit_id")) {
      unit = j.at("unit_id").is_string() ? j.at("unit_id").get<std::string>()
                                         : j.at("unit_id").dump();
    }
    auto [it, inserted] = slot.try_emplace(unit, tables.size());
    if (inserted) {
      tables.emplace_back();
      tables.back().unit_id = unit;
      rows.emplace_back();
    }
    data::ScadaTable& t = tables[it->second];
    t.timestamps.push_back(parse_timestamp(field(schema.timestamp_column).get<std::string>()));
    std::vector<double> values;
    values.push_back(number(schema.power_column));
    for (const auto& f : schema.features) values.push_back(number(f.column));
    rows[it->second].push_back(std::move(values));
  }
  std::vector<data::TurbineDataset> out;
  for (std::size_t u = 0; u < tables.size(); ++u) {
    auto& t = tables[u];
    const auto n = static_cast<data::Index>(rows[u].size());
    const auto d = static_cast<data::Index>(schema.features.size());
    t.values.resize(n, d);
    t.power.resize(n);
    t.status.assign(rows[u].size(), data::RowStatus::normal);
    for (data::Index r = 0; r < n; ++r) {
      const auto& v = rows[u][static_cast<std::size_t>(r)];
      t.power[r] = v[0];
      for (data::Index c = 0; c < d; ++c) t.values(r, c) = v[static_cast<std::size_t>(c + 1)];
    }
    out.push_back(data::engineer(t, schema));
  }
  return out;
}

std::string trace_text(const std::vector<monitor::TracePoint>& trace,
                       const monitor::MonitorConfig& cfg) {
  monitor::WindowRun run;
  run.trace = trace;
  return render([&](std::ostream& o) { monitor::write_trace_csv(o, run, cfg); });
}

}  // namespace

void cmd_evaluate(Run& run, const EvaluateFlags& flags) {
  const ModelBundle bundle = open_bundle(run, flags.bundle);
  const std::string input = required_path(run, "input", flags.input);
  const data::ScadaSchema schema = load_schema(run, flags.schema);
  const data::TurbineDataset ds = read_input(run, input, schema);
  if (ds.empty()) throw DataError("cli", input + ": test set has no rows");

  const auto levels = level_list(run, "calibration_levels", flags.levels, metrics::nominal_levels(20));
  const auto cover = level_list(run, "coverage_levels", flags.coverage, {0.95, 0.99});
  const double rated = run.setting<double>("rated_power", flags.rated_power, 2050.0);

  const auto preds = predict_dataset(bundle, ds, run.threads());
  const std::vector<double> y(ds.target_power.data(), ds.target_power.data() + ds.size());
  const metrics::EvaluationReport report = metrics::evaluate(preds, y, rated, levels, cover);

  nlohmann::json j = report.to_json();
  j["unit"] = ds.unit_id;
  j["model"] = bundle.preset;
  run.write("report.json", j.dump(2) + "\n");
  run.write("calibration.csv", render([&](std::ostream& o) { report.write_calibration_csv(o); }));
  run.summary("evaluation", {{"n", report.n},
                             {"nrmse_percent", report.errors.nrmse},
                             {"mce_percent", report.mce}});
}

void cmd_monitor(Run& run, const MonitorFlags& flags) {
  const ModelBundle bundle = open_bundle(run, flags.bundle);
  const std::string input = required_path(run, "input", flags.input);
  const data::ScadaSchema schema = load_schema(run, flags.schema);
  const std::string unit = run.setting<std::string>("unit", flags.unit, "");

  monitor::MonitorConfig cfg;
  cfg.allowance_k = run.setting<double>("allowance_k", flags.allowance, cfg.allowance_k);
  cfg.decision_interval =
      run.setting<double>("decision_interval", flags.decision_interval, cfg.decision_interval);
  cfg.window_length =
      run.setting<std::size_t>("window_length", flags.window_length, cfg.window_length);
  cfg.validate();
  const std::string mode_name = run.setting<std::string>("mode", flags.mode, "window");
  if (mode_name != "window" && mode_name != "continuous") {
    throw ConfigError("cli", "mode must be 'window' or 'continuous'");
  }
  const auto mode = mode_name == "window" ? monitor::ChartMode::window : monitor::ChartMode::continuous;
  const bool auto_ack = run.setting<bool>("auto_acknowledge", flags.auto_ack, false);
  const bool traces = run.setting<bool>("traces", flags.traces, true);

  std::vector<data::TurbineDataset> streams;
  run.input(input);
  if (is_jsonl(input)) {
    streams = read_jsonl_stream(input, schema, unit);
  } else {
    streams.push_back(data::load_dataset(input, schema, unit));
  }

  std::vector<monitor::AlarmEvent> alarms;
  nlohmann::json units = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> trace_files;
  for (const auto& ds : streams) {
    if (ds.empty()) continue;
    const auto preds = predict_dataset(bundle, ds, run.threads());
    const auto v = standardized_residuals(preds, ds.target_power);
    monitor::CusumChart chart(ds.unit_id, cfg, mode, auto_ack);
    std::vector<monitor::TracePoint> trace;
    std::size_t current_window = 0;
    std::size_t unit_alarms = 0;
    const auto flush = [&](const std::string& suffix) {
      if (traces && !trace.empty()) {
        trace_files.emplace_back("traces/" + ds.unit_id + suffix + ".csv", trace_text(trace, cfg));
      }
      trace.clear();
    };
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto event = chart.update(ds.timestamps[i], v[i]);
      if (mode == monitor::ChartMode::window && chart.window_index() != current_window) {
        flush("_window_" + std::to_string(current_window + 1));
        current_window = chart.window_index();
      }
      const auto& s = chart.state();
      trace.push_back({s.s_high, s.s_low, s.statistic()});
      if (event) {
        alarms.push_back(*event);
        ++unit_alarms;
      }
    }
    flush(mode == monitor::ChartMode::window ? "_window_" + std::to_string(current_window + 1)
                                             : std::string());
    units[ds.unit_id] = {{"rows", ds.size()},
                         {"alarms", unit_alarms},
                         {"gaps", chart.gap_count()},
                         {"windows", chart.window_index() + 1},
                         {"final_state", chart.to_json()}};
  }
  if (units.empty()) throw DataError("cli", input + ": stream has no rows");

  std::stable_sort(alarms.begin(), alarms.end(), [](const auto& a, const auto& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.unit < b.unit;
  });
  std::string alarm_text;
  for (const auto& a : alarms) alarm_text += a.to_json().dump() + "\n";
  run.write("alarms.jsonl", alarm_text);
  for (const auto& [name, content] : trace_files) run.write(name, content);
  nlohmann::json summary = {{"config", cfg.to_json()},
                            {"mode", mode_name},
                            {"auto_acknowledge", auto_ack},
                            {"alarms", alarms.size()},
                            {"units", units}};
  run.write("monitor_summary.json", summary.dump(2) + "\n");
  run.summary("monitor", {{"alarms", alarms.size()}, {"units", units.size()}});
}

void cmd_sweep(Run& run, const SweepFlags& flags) {
  const ModelBundle bundle = open_bundle(run, flags.bundle);
  const std::filesystem::path dir = required_path(run, "windows", flags.windows);
  const data::ScadaSchema schema = load_schema(run, flags.schema);
  std::vector<double> grid;
  if (flags.grid) {
    grid = parse_number_list(*flags.grid);
    run.setting<std::vector<double>>("grid", grid, {});
  } else {
    grid = run.setting<std::vector<double>>("grid", std::nullopt, {5, 10, 15, 20, 25, 30});
  }
  const double k = run.setting<double>("allowance_k", flags.allowance, 0.5);

  const auto index_path = dir / "windows.csv";
  std::ifstream in(index_path);
  if (!in) throw DataError("cli", "cannot open " + index_path.string());
  run.input(index_path);
  std::string line;
  if (!csv::next_line(in, line)) throw DataError("cli", index_path.string() + " is empty");
  const auto header = csv::split_line(line);
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw SchemaError("cli", index_path.string() + ": missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = col("window_id");
  const std::size_t c_file = col("file");
  const std::size_t c_label = col("label");
  const std::size_t c_onset = col("fault_onset");

  std::vector<monitor::LabeledWindow> windows;
  while (csv::next_line(in, line)) {
    const auto f = csv::split_line(line);
    if (f.size() != header.size()) {
      throw DataError("cli", index_path.string() + ": wrong field count in '" + line + "'");
    }
    monitor::LabeledWindow w;
    w.id = f[c_id];
    if (f[c_label] == "faulty") {
      w.label = monitor::WindowLabel::faulty;
    } else if (f[c_label] != "healthy") {
      throw DataError("cli", "window " + w.id + ": label must be 'faulty' or 'healthy'");
    }
    if (!f[c_onset].empty()) w.fault_onset = parse_timestamp(f[c_onset]);
    const data::TurbineDataset ds = read_input(run, dir / f[c_file], schema, w.id);
    if (ds.empty()) throw DataError("cli", "window " + w.id + " has no rows");
    w.v = standardized_residuals(predict_dataset(bundle, ds, run.threads()), ds.target_power);
    w.timestamps = ds.timestamps;
    windows.push_back(std::move(w));
  }
  if (windows.empty()) throw DataError("cli", index_path.string() + " lists no windows");

  const auto rows = monitor::sweep_decision_interval(windows, k, grid);
  run.write("sweep.csv", render([&](std::ostream& o) { monitor::write_sweep_csv(o, rows); }));
  nlohmann::json j = {{"allowance_k", k}, {"windows", windows.size()}, {"rows", nlohmann::json::array()}};
  for (const auto& r : rows) {
    nlohmann::json entry = r.result.to_json();
    entry["decision_interval"] = r.decision_interval;
    j["rows"].push_back(std::move(entry));
  }
  run.write("sweep.json", j.dump(2) + "\n");
  run.summary("sweep", {{"windows", windows.size()}, {"grid", grid}});
}

}  // namespace fleetcm::cli
