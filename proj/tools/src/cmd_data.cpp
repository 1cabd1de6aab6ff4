#include <fstream>

#include "fleetcm/csv.hpp"

#include "commands.hpp"
#include "common.hpp"
#include "fleetcm/simulate.hpp"

namespace fleetcm::cli {

void cmd_simulate(Run& run, const SimulateFlags& flags) {
  nlohmann::json sim_json = run.config();
  sim_json.erase("windows");
  sim::SimConfig cfg = sim::SimConfig::from_json(sim_json);
  cfg.seed = run.seed(cfg.seed);
  cfg.n_units = run.setting<std::size_t>("n_units", flags.units, cfg.n_units);
  if (flags.rows) cfg.rows_per_unit = {*flags.rows};
  cfg.validate();
  const nlohmann::json resolved = cfg.to_json();
  for (const auto& [key, value] : resolved.items()) run.resolved(key, value);

  const nlohmann::json wj = run.section("windows");
  const bool want_windows = run.setting<bool>("windows", flags.windows, !wj.empty());
  sim::WindowCorpusConfig wcfg;
  if (want_windows) {
    wcfg.healthy = flags.healthy.value_or(wj.value("healthy", wcfg.healthy));
    wcfg.faulty = flags.faulty.value_or(wj.value("faulty", wcfg.faulty));
    wcfg.length = wj.value("length", wcfg.length);
    wcfg.shift_sigmas = flags.shift_sigmas.value_or(wj.value("shift_sigmas", wcfg.shift_sigmas));
    wcfg.seed = wj.value("seed", cfg.seed + 7);
  }

  // Everything is generated before the first file is written.
  const sim::SimulatedFleet fleet = sim::simulate_fleet(cfg);
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& raw : fleet.raw) {
    files.emplace_back(raw.unit_id + ".csv",
                       render([&](std::ostream& o) { data::write_scada_csv(o, raw, fleet.schema); }));
  }
  files.emplace_back("events.csv",
                     render([&](std::ostream& o) { data::write_events_csv(o, fleet.events); }));
  files.emplace_back("ground_truth.csv", render([&](std::ostream& o) {
                       o << "unit_id,timestamp,status,mu_kw,sigma_kw\n";
                       for (std::size_t u = 0; u < fleet.raw.size(); ++u) {
                         const auto& raw = fleet.raw[u];
                         const auto& truth = fleet.truth[u];
                         for (std::size_t r = 0; r < raw.timestamps.size(); ++r) {
                           const auto i = static_cast<data::Index>(r);
                           o << raw.unit_id << ',' << format_timestamp(raw.timestamps[r]) << ','
                             << data::to_string(raw.status[r]) << ','
                             << csv::format_number(truth.mu[i]) << ','
                             << csv::format_number(truth.sigma[i]) << '\n';
                         }
                       }
                     }));
  if (want_windows) {
    const auto windows = sim::simulate_windows(cfg, wcfg);
    std::ostringstream index;
    index << "window_id,file,label,fault_onset\n";
    for (const auto& w : windows) {
      const std::string file = w.id + ".csv";
      files.emplace_back("windows/" + file, render([&](std::ostream& o) {
                           data::write_scada_csv(o, w.raw, fleet.schema);
                         }));
      index << w.id << ',' << file << ',' << (w.faulty ? "faulty" : "healthy") << ','
            << (w.faulty ? format_timestamp(w.fault_onset) : std::string()) << '\n';
    }
    files.emplace_back("windows/windows.csv", index.str());
    run.summary("windows", {{"healthy", wcfg.healthy},
                            {"faulty", wcfg.faulty},
                            {"length", wcfg.length},
                            {"shift_sigmas", wcfg.shift_sigmas},
                            {"seed", wcfg.seed}});
  }
  for (const auto& [name, content] : files) run.write(name, content);
  run.summary("simulation", cfg.to_json());
}

void cmd_ingest(Run& run, const IngestFlags& flags) {
  const std::string input = required_path(run, "input", flags.input);
  const data::ScadaSchema schema = load_schema(run, flags.schema);
  const std::string unit =
      run.setting<std::string>("unit", flags.unit, std::filesystem::path(input).stem().string());
  run.input(input);
  const data::IngestResult result = data::ingest(std::filesystem::path(input), schema, unit);
  const std::string output = run.setting<std::string>("output", flags.output, unit + ".dataset.csv");
  run.write(output,
            render([&](std::ostream& o) { data::write_dataset_csv(o, result.dataset); }));
  run.write("ingest_report.json", result.report.to_json().dump(2) + "\n");
  run.summary("ingest", result.report.to_json());
}

void cmd_filter(Run& run, const FilterFlags& flags) {
  const std::string input = required_path(run, "input", flags.input);
  const std::string events_path = required_path(run, "events", flags.events);
  const data::ScadaSchema schema = load_schema(run, flags.schema);
  const std::string unit = run.setting<std::string>("unit", flags.unit, "");
  const double days = run.setting<double>("pre_outage_days", flags.pre_outage_days, 7.0);
  if (!(days >= 0.0)) throw ConfigError("cli", "pre_outage_days must be non-negative");

  const data::TurbineDataset ds = read_input(run, input, schema, unit);
  run.input(events_path);
  const data::EventLog events = data::read_events_csv(std::filesystem::path(events_path));
  const data::FilterResult result = data::filter_events(ds, events, days);
  const std::string output =
      run.setting<std::string>("output", flags.output, ds.unit_id + ".filtered.csv");
  run.write(output,
            render([&](std::ostream& o) { data::write_dataset_csv(o, result.dataset); }));
  run.write("filter_report.json", result.report.to_json().dump(2) + "\n");
  run.summary("filter", result.report.to_json());
}

}  // namespace fleetcm::cli
