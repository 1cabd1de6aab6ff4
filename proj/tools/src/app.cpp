#include "app.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "fleetcm/errors.hpp"
#include "fleetcm/version.hpp"

namespace fleetcm::cli {

namespace {

void add_train_options(CLI::App* sub, TrainFlags& f, bool finetune) {
  sub->add_option("--input,-i", f.inputs, finetune || sub->get_name() == "train"
                                              ? "Unit dataset (engineered or raw SCADA CSV)"
                                              : "Unit datasets, one per turbine");
  sub->add_option("--arch", f.arch, "A1, A2 or an architecture JSON file");
  sub->add_option("--schema", f.schema, "Column schema JSON for raw SCADA input");
  sub->add_option("--epochs", f.epochs, "Maximum number of epochs");
  sub->add_option("--lr", f.lr, "Adam learning rate");
  sub->add_option("--batch-size", f.batch_size, "Minibatch size");
  sub->add_option("--patience", f.patience, "Early-stopping patience in epochs");
  sub->add_option("--test-fraction", f.test_fraction, "Latest fraction held out for testing");
  sub->add_option("--val-fraction", f.val_fraction, "Validation share of the remaining rows");
  if (finetune) {
    sub->add_option("--bundle", f.bundle, "Pretrained model bundle");
  }
  if (finetune || sub->get_name() == "train") {
    sub->add_option("--unit", f.unit, "Unit id (defaults to the file's)");
  }
}

}  // namespace

int run(const std::vector<std::string>& argv) {
  CLI::App app{"Probabilistic normal-behaviour models and CUSUM monitoring for turbine fleets",
               "fleetcm"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions globals;
  app.add_option("--seed", globals.seed, "Random seed");
  app.add_option("--config", globals.config_path, "JSON config for the subcommand")
      ->check(CLI::ExistingFile);
  app.add_option("--out-dir", globals.out_dir, "Directory for every output artifact");
  app.add_option("--threads", globals.threads, "Worker threads for batch prediction");

  std::function<void(Run&)> action;
  std::string name;
  const auto bind = [&](CLI::App* sub, auto handler) {
    sub->callback([&, sub, handler] {
      name = sub->get_name();
      action = handler;
    });
  };

  SimulateFlags sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic fleet with known mean/stddev");
  s->add_option("--units", sim.units, "Number of turbines");
  s->add_option("--rows", sim.rows, "Rows per turbine");
  s->add_flag("--windows", sim.windows, "Also write a labeled 72-hour window corpus");
  s->add_option("--healthy", sim.healthy, "Healthy windows in the corpus");
  s->add_option("--faulty", sim.faulty, "Faulty windows in the corpus");
  s->add_option("--shift-sigmas", sim.shift_sigmas, "Power shift of faulty windows, in sigmas");
  bind(s, [&](Run& r) { cmd_simulate(r, sim); });

  IngestFlags ing;
  auto* i = app.add_subcommand("ingest", "Read a SCADA CSV and engineer the feature set");
  i->add_option("--input,-i", ing.input, "SCADA CSV");
  i->add_option("--schema", ing.schema, "Column schema JSON");
  i->add_option("--unit", ing.unit, "Unit id (defaults to the file stem)");
  i->add_option("--output,-o", ing.output, "Output file name inside --out-dir");
  bind(i, [&](Run& r) { cmd_ingest(r, ing); });

  FilterFlags fil;
  auto* f = app.add_subcommand("filter", "Drop rows affected by events and pre-outage weeks");
  f->add_option("--input,-i", fil.input, "Dataset or SCADA CSV");
  f->add_option("--events", fil.events, "Events CSV (unit_id,start,end,category)");
  f->add_option("--schema", fil.schema, "Column schema JSON for raw SCADA input");
  f->add_option("--unit", fil.unit, "Unit id (defaults to the file's)");
  f->add_option("--pre-outage-days", fil.pre_outage_days, "Days removed before a forced outage");
  f->add_option("--output,-o", fil.output, "Output file name inside --out-dir");
  bind(f, [&](Run& r) { cmd_filter(r, fil); });

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "Train a probabilistic MLP on one turbine");
  add_train_options(t, tr, false);
  bind(t, [&](Run& r) { cmd_train(r, tr); });

  TrainFlags pre;
  auto* p = app.add_subcommand("pretrain", "Train one network on the pooled fleet");
  add_train_options(p, pre, false);
  bind(p, [&](Run& r) { cmd_pretrain(r, pre); });

  TrainFlags fine;
  auto* ft = app.add_subcommand("finetune", "Continue training a pretrained bundle on one unit");
  add_train_options(ft, fine, true);
  bind(ft, [&](Run& r) { cmd_finetune(r, fine); });

  EvaluateFlags ev;
  auto* e = app.add_subcommand("evaluate", "Point errors, coverage and calibration on a test set");
  e->add_option("--bundle", ev.bundle, "Model bundle");
  e->add_option("--input,-i", ev.input, "Test dataset");
  e->add_option("--schema", ev.schema, "Column schema JSON for raw SCADA input");
  e->add_option("--levels", ev.levels, "Calibration levels, comma separated");
  e->add_option("--coverage", ev.coverage, "Coverage levels, comma separated");
  e->add_option("--rated-power", ev.rated_power, "Rated power in kW");
  bind(e, [&](Run& r) { cmd_evaluate(r, ev); });

  MonitorFlags mon;
  auto* m = app.add_subcommand("monitor", "Run CUSUM charts over a stream of observations");
  m->add_option("--bundle", mon.bundle, "Model bundle");
  m->add_option("--input,-i", mon.input, "Stream as CSV or line-delimited JSON");
  m->add_option("--schema", mon.schema, "Column schema JSON for raw SCADA input");
  m->add_option("--unit", mon.unit, "Unit id for rows that carry none");
  m->add_option("--allowance,-k", mon.allowance, "CUSUM allowance k");
  m->add_option("--decision-interval,-I", mon.decision_interval, "CUSUM decision interval I");
  m->add_option("--window-length", mon.window_length, "Samples per window (window mode)");
  m->add_option("--mode", mon.mode, "window or continuous")
      ->check(CLI::IsMember({"window", "continuous"}));
  m->add_flag("--auto-ack", mon.auto_ack, "Continuous mode: reset after every alarm");
  m->add_flag("--traces,!--no-traces", mon.traces, "Write per-window trace CSVs");
  bind(m, [&](Run& r) { cmd_monitor(r, mon); });

  SweepFlags sw;
  auto* w = app.add_subcommand("sweep", "Precision, recall and notice time across I values");
  w->add_option("--bundle", sw.bundle, "Model bundle");
  w->add_option("--windows", sw.windows, "Directory holding windows.csv and the window files");
  w->add_option("--schema", sw.schema, "Column schema JSON for raw SCADA input");
  w->add_option("--grid", sw.grid, "Decision intervals, comma separated");
  w->add_option("--allowance,-k", sw.allowance, "CUSUM allowance k");
  bind(w, [&](Run& r) { cmd_sweep(r, sw); });

  try {
    std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    Run run(name, globals, argv);
    action(run);
    run.finish();
    return kOk;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kConfigError;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDataError;
  } catch (const ShapeError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDataError;
  } catch (const NumericError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kNumericError;
  } catch (const DomainError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kNumericError;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: io: " << err.what() << '\n';
    return kDataError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
}

}  // namespace fleetcm::cli
