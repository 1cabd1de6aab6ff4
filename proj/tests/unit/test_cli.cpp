#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "app.hpp"
#include "datasets.hpp"
#include "fleetcm/bundle.hpp"
#include "fleetcm/csv.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using fleetcm::ModelBundle;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("fleetcm_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fleetcm");
  return fleetcm::cli::run(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<fs::path> files_under(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
  }
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// Bundle whose predictions are exactly N(offset, sd^2) for every input: a
// zero network with a one-feature input, so residuals of y ~ N(offset, sd^2)
// are standard normal.
fs::path known_bundle(const fs::path& dir, double offset, double sd) {
  ModelBundle b;
  b.preset = "custom";
  b.arch = {1, {1}, {}, {}, 0.001, offset, (sd - 0.001) / std::numbers::ln2};
  b.params = fleetcm::model::zeros(b.arch);
  b.normalization = fleetcm::data::fit_normalization(testdata::make(20, 1, [](const auto&) { return 0.0; }, 0.0, 1));
  const fs::path p = dir / "known_bundle.json";
  fleetcm::save_bundle(p, b);
  return p;
}

// Dataset CSV of `n` rows with y ~ N(offset + shift(t) * sd, sd^2).
template <class Shift>
void write_stream(const fs::path& p, std::size_t n, double offset, double sd, std::uint64_t seed,
                  Shift shift, std::size_t first_row = 0) {
  auto ds = testdata::make(n, 1, [](const auto&) { return 0.0; }, 0.0, seed, "unit_1", first_row);
  std::mt19937_64 rng(seed * 7919 + 1);
  std::normal_distribution<double> n01;
  for (std::size_t t = 0; t < n; ++t) ds.target_power[static_cast<Eigen::Index>(t)] = offset + sd * (n01(rng) + shift(t));
  std::ofstream out(p);
  fleetcm::data::write_dataset_csv(out, ds);
}

// One simulated unit with a window corpus and an A1 model trained on it.
class TrainedFixture : public ::testing::Test {
 protected:
  static fs::path dir_;

  static void SetUpTestSuite() {
    dir_ = fresh_dir("trained");
    // Half the default noise, so a good fit stays well inside 5 % of rated power.
    spit(dir_ / "sim.json", R"({"noise_scale": 0.5})");
    ASSERT_EQ(cli({"simulate", "--config", (dir_ / "sim.json").string(), "--units", "1", "--rows", "4000",
                   "--windows", "--healthy", "6", "--faulty", "6", "--seed", "3", "--out-dir",
                   (dir_ / "sim").string()}),
              0);
    ASSERT_EQ(cli({"train", "--input", (dir_ / "sim" / "unit_1.csv").string(), "--arch", "A1", "--epochs",
                   "60", "--seed", "1", "--out-dir", (dir_ / "model").string()}),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
};
fs::path TrainedFixture::dir_;

}  // namespace

TEST(CliSimulate, MinimalConfigWritesThreeFilesAndAManifest) {
  const auto dir = fresh_dir("sim_min");
  spit(dir / "sim.json", R"({"n_units": 1, "rows_per_unit": 100})");
  ASSERT_EQ(cli({"simulate", "--config", (dir / "sim.json").string(), "--out-dir", (dir / "out").string()}), 0);
  const auto files = files_under(dir / "out");
  EXPECT_EQ(files, (std::vector<fs::path>{"events.csv", "ground_truth.csv", "manifest.jsonl", "unit_1.csv"}));
  EXPECT_EQ(lines(dir / "out" / "unit_1.csv").size(), 101u);
  const auto manifest = nlohmann::json::parse(lines(dir / "out" / "manifest.jsonl").at(0));
  EXPECT_EQ(manifest["subcommand"], "simulate");
  EXPECT_EQ(manifest["outputs"].size(), 3u);
  EXPECT_TRUE(manifest.contains("wall_seconds"));
  EXPECT_TRUE(manifest.contains("version"));
  fs::remove_all(dir);
}

TEST(CliSimulate, SameSeedGivesByteIdenticalOutputs) {
  const auto dir = fresh_dir("sim_det");
  for (const char* sub : {"a", "b"}) {
    ASSERT_EQ(cli({"simulate", "--units", "2", "--rows", "300", "--seed", "11", "--out-dir", (dir / sub).string()}), 0);
  }
  for (const char* f : {"unit_1.csv", "unit_2.csv", "events.csv", "ground_truth.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  ASSERT_EQ(cli({"simulate", "--units", "2", "--rows", "300", "--seed", "12", "--out-dir", (dir / "c").string()}), 0);
  EXPECT_NE(slurp(dir / "a" / "unit_1.csv"), slurp(dir / "c" / "unit_1.csv"));
  fs::remove_all(dir);
}

TEST(CliSimulate, InvalidFaultScheduleFailsWithoutFiles) {
  const auto dir = fresh_dir("sim_bad");
  spit(dir / "sim.json", R"({"rows_per_unit": 100, "faults": [{"unit": 0, "start_row": 50, "end_row": 40}]})");
  EXPECT_EQ(cli({"simulate", "--config", (dir / "sim.json").string(), "--out-dir", (dir / "out").string()}), 2);
  EXPECT_TRUE(!fs::exists(dir / "out") || files_under(dir / "out").empty());
  fs::remove_all(dir);
}

TEST(CliSimulate, FlagsOverrideConfigAndManifestsAppend) {
  const auto dir = fresh_dir("sim_override");
  spit(dir / "sim.json", R"({"rows_per_unit": 50, "seed": 4})");
  ASSERT_EQ(cli({"simulate", "--config", (dir / "sim.json").string(), "--rows", "80", "--out-dir", dir.string()}), 0);
  EXPECT_EQ(lines(dir / "unit_1.csv").size(), 81u);
  ASSERT_EQ(cli({"simulate", "--config", (dir / "sim.json").string(), "--out-dir", dir.string()}), 0);
  EXPECT_EQ(lines(dir / "unit_1.csv").size(), 51u);
  const auto manifest = lines(dir / "manifest.jsonl");
  ASSERT_EQ(manifest.size(), 2u);
  EXPECT_EQ(nlohmann::json::parse(manifest[0])["settings"]["rows_per_unit"][0], 80);
  EXPECT_EQ(nlohmann::json::parse(manifest[1])["settings"]["rows_per_unit"][0], 50);
  fs::remove_all(dir);
}

TEST(CliErrors, ExitCodesByCategory) {
  const auto dir = fresh_dir("errors");
  // Unknown subcommand option and unknown preset are configuration errors.
  EXPECT_EQ(cli({"simulate", "--no-such-flag"}), 2);
  EXPECT_EQ(cli({"frobnicate"}), 2);
  EXPECT_EQ(cli({"simulate", "--rows", "0", "--out-dir", dir.string()}), 2);
  // A missing input file is a data error.
  EXPECT_EQ(cli({"ingest", "--input", (dir / "missing.csv").string(), "--out-dir", dir.string()}), 3);
  ASSERT_EQ(cli({"simulate", "--rows", "200", "--out-dir", (dir / "sim").string()}), 0);
  EXPECT_EQ(cli({"train", "--input", (dir / "sim" / "unit_1.csv").string(), "--arch", "A9", "--out-dir",
                 (dir / "t").string()}),
            2);
  // An absurd learning rate blows the weights up.
  EXPECT_EQ(cli({"train", "--input", (dir / "sim" / "unit_1.csv").string(), "--arch", "A1", "--lr", "1e200",
                 "--epochs", "3", "--out-dir", (dir / "t").string()}),
            4);
  fs::remove_all(dir);
}

TEST(CliErrors, OutputsCannotEscapeTheOutDir) {
  const auto dir = fresh_dir("escape");
  ASSERT_EQ(cli({"simulate", "--rows", "50", "--out-dir", (dir / "sim").string()}), 0);
  EXPECT_EQ(cli({"ingest", "--input", (dir / "sim" / "unit_1.csv").string(), "--output", "../stolen.csv",
                 "--out-dir", (dir / "out").string()}),
            2);
  EXPECT_FALSE(fs::exists(dir / "stolen.csv"));
  EXPECT_EQ(cli({"ingest", "--input", (dir / "sim" / "unit_1.csv").string(), "--output", "/tmp/stolen.csv",
                 "--out-dir", (dir / "out").string()}),
            2);
  fs::remove_all(dir);
}

TEST(CliData, IngestAndFilterRoundTrip) {
  const auto dir = fresh_dir("ingest");
  spit(dir / "sim.json",
       R"({"rows_per_unit": 2000, "faults": [{"unit": 0, "start_row": 1500, "duration_rows": 20, "type": "power_shift"},
                                            {"unit": 0, "start_row": 100, "duration_rows": 10, "type": "standby"}]})");
  ASSERT_EQ(cli({"simulate", "--config", (dir / "sim.json").string(), "--out-dir", (dir / "sim").string()}), 0);
  ASSERT_EQ(cli({"ingest", "--input", (dir / "sim" / "unit_1.csv").string(), "--out-dir", (dir / "ing").string()}), 0);
  const auto report = read_json(dir / "ing" / "ingest_report.json");
  EXPECT_EQ(report["rows_kept"], 2000);
  ASSERT_EQ(cli({"filter", "--input", (dir / "ing" / "unit_1.dataset.csv").string(), "--events",
                 (dir / "sim" / "events.csv").string(), "--out-dir", (dir / "flt").string()}),
            0);
  const auto fr = read_json(dir / "flt" / "filter_report.json");
  EXPECT_EQ(fr["removed"]["standby"], 10);
  EXPECT_EQ(fr["removed"]["pre_outage_window"], 7 * 144);
  EXPECT_EQ(fr["rows_out"].get<int>() + 10 + 7 * 144 + fr["removed"]["forced_outage"].get<int>(), 2000);
  fs::remove_all(dir);
}

TEST_F(TrainedFixture, BundleLoadsAndPredicts) {
  const auto bundle = fleetcm::load_bundle(dir_ / "model" / "bundle.json");
  EXPECT_EQ(bundle.preset, "A1");
  EXPECT_EQ(fleetcm::model::parameter_count(bundle.arch), 17202);
  std::ifstream in(dir_ / "sim" / "unit_1.csv");
  const auto ds = fleetcm::data::ingest(in, fleetcm::data::ScadaSchema::default_set(), "unit_1").dataset;
  const auto preds = fleetcm::predict_dataset(bundle, ds);
  ASSERT_EQ(preds.size(), ds.size());
  for (const auto& p : preds) {
    EXPECT_TRUE(std::isfinite(p.mean));
    EXPECT_GE(p.stddev, bundle.arch.delta);
  }
  EXPECT_GE(lines(dir_ / "model" / "history.csv").size(), 2u);
  EXPECT_TRUE(fs::exists(dir_ / "model" / "test_unit_1.csv"));
}

TEST_F(TrainedFixture, EvaluateErrorIsNearTheNoiseFloorAndUsesConfiguredLevels) {
  const auto out = dir_ / "eval";
  ASSERT_EQ(cli({"evaluate", "--bundle", (dir_ / "model" / "bundle.json").string(), "--input",
                 (dir_ / "sim" / "unit_1.csv").string(), "--levels", "0.1,0.5,0.9", "--out-dir", out.string()}),
            0);
  const auto report = read_json(out / "report.json");
  // Observations carry the simulator's noise, so the best possible RMSE is the
  // root mean square of the true stddev.
  double sum_sq = 0.0;
  std::size_t n = 0;
  const auto truth = lines(dir_ / "sim" / "ground_truth.csv");
  for (std::size_t i = 1; i < truth.size(); ++i) {
    const double sd = std::stod(truth[i].substr(truth[i].rfind(',') + 1));
    sum_sq += sd * sd;
    ++n;
  }
  const double floor_kw = std::sqrt(sum_sq / static_cast<double>(n));
  EXPECT_LT(report["nrmse_percent"].get<double>(), 5.0);
  EXPECT_LT(report["rmse_kw"].get<double>(), 1.1 * floor_kw);
  EXPECT_GE(report["rmse_kw"].get<double>(), 0.9 * floor_kw);
  const auto cal = lines(out / "calibration.csv");
  ASSERT_EQ(cal.size(), 4u);
  EXPECT_EQ(cal[1].substr(0, 4), "0.1,");
  EXPECT_EQ(cal[2].substr(0, 4), "0.5,");
  EXPECT_EQ(cal[3].substr(0, 4), "0.9,");
  EXPECT_EQ(report["calibration"].size(), 3u);
  EXPECT_TRUE(report["coverage"].contains("0.95"));
}

TEST_F(TrainedFixture, EvaluateRejectsAnEmptyTestSet) {
  const auto out = dir_ / "eval_empty";
  fs::create_directories(out);
  const auto header = lines(dir_ / "sim" / "unit_1.csv").at(0);
  spit(out / "empty.csv", header + "\n");
  EXPECT_EQ(cli({"evaluate", "--bundle", (dir_ / "model" / "bundle.json").string(), "--input",
                 (out / "empty.csv").string(), "--out-dir", out.string()}),
            3);
  EXPECT_FALSE(fs::exists(out / "report.json"));
}

TEST_F(TrainedFixture, SweepOverFourIntervalsHasNonIncreasingRecall) {
  const auto out = dir_ / "sweep";
  ASSERT_EQ(cli({"sweep", "--bundle", (dir_ / "model" / "bundle.json").string(), "--windows",
                 (dir_ / "sim" / "windows").string(), "--grid", "5,10,15,20", "--out-dir", out.string()}),
            0);
  const auto rows = lines(out / "sweep.csv");
  ASSERT_EQ(rows.size(), 5u);
  const auto j = read_json(out / "sweep.json");
  ASSERT_EQ(j["rows"].size(), 4u);
  double prev = 2.0;
  for (const auto& r : j["rows"]) {
    ASSERT_FALSE(r["recall"].is_null());
    EXPECT_LE(r["recall"].get<double>(), prev);
    prev = r["recall"].get<double>();
    EXPECT_EQ(r["windows"].size(), 12u);
  }
}

TEST_F(TrainedFixture, MonitorWritesAlarmsTracesAndSummary) {
  const auto out = dir_ / "monitor";
  ASSERT_EQ(cli({"monitor", "--bundle", (dir_ / "model" / "bundle.json").string(), "--input",
                 (dir_ / "sim" / "unit_1.csv").string(), "--window-length", "432", "--out-dir", out.string()}),
            0);
  const auto summary = read_json(out / "monitor_summary.json");
  EXPECT_EQ(summary["units"]["unit_1"]["rows"], 4000);
  EXPECT_EQ(summary["units"]["unit_1"]["windows"], 10);
  EXPECT_TRUE(fs::exists(out / "alarms.jsonl"));
  EXPECT_TRUE(fs::exists(out / "traces" / "unit_1_window_1.csv"));
  EXPECT_EQ(lines(out / "traces" / "unit_1_window_1.csv").size(), 433u);
  for (const auto& l : lines(out / "alarms.jsonl")) {
    const auto a = nlohmann::json::parse(l);
    EXPECT_EQ(a["unit"], "unit_1");
    EXPECT_GT(a["statistic"].get<double>(), 5.0);
  }
}

TEST(CliTransfer, PretrainThenFinetuneImprovesOnTheTargetUnit) {
  const auto dir = fresh_dir("transfer");
  spit(dir / "sim.json", R"({"n_units": 3, "rows_per_unit": [1500, 400, 1500], "seed": 21})");
  ASSERT_EQ(cli({"simulate", "--config", (dir / "sim.json").string(), "--out-dir", (dir / "sim").string()}), 0);
  ASSERT_EQ(cli({"pretrain", "--input", (dir / "sim" / "unit_1.csv").string(), "--input",
                 (dir / "sim" / "unit_2.csv").string(), "--input", (dir / "sim" / "unit_3.csv").string(),
                 "--arch", "A1", "--epochs", "15", "--seed", "2", "--out-dir", (dir / "pre").string()}),
            0);
  ASSERT_EQ(cli({"finetune", "--bundle", (dir / "pre" / "bundle.json").string(), "--input",
                 (dir / "sim" / "unit_2.csv").string(), "--epochs", "20", "--seed", "2", "--out-dir",
                 (dir / "ft").string()}),
            0);
  EXPECT_TRUE(fs::exists(dir / "pre" / "bundle.json"));
  EXPECT_TRUE(fs::exists(dir / "ft" / "bundle.json"));
  // Row 0 of the fine-tune history is the pretrained model on unit 2's validation split.
  const auto hist = lines(dir / "ft" / "history.csv");
  ASSERT_GE(hist.size(), 2u);
  auto val_of = [](const std::string& row) { return std::stod(row.substr(row.rfind(',') + 1)); };
  double best = val_of(hist[1]);
  for (std::size_t i = 2; i < hist.size(); ++i) best = std::min(best, val_of(hist[i]));
  EXPECT_LE(best, val_of(hist[1]));
  const auto ft = fleetcm::load_bundle(dir / "ft" / "bundle.json");
  const auto pre = fleetcm::load_bundle(dir / "pre" / "bundle.json");
  EXPECT_EQ(ft.arch, pre.arch);
  EXPECT_EQ(ft.training["pretrained_bundle"].get<std::string>(), (dir / "pre" / "bundle.json").string());

  // A bundle of a different architecture cannot be fine-tuned as A2.
  testing::internal::CaptureStderr();
  const int code = cli({"finetune", "--bundle", (dir / "pre" / "bundle.json").string(), "--arch", "A2",
                        "--input", (dir / "sim" / "unit_2.csv").string(), "--out-dir", (dir / "bad").string()});
  const std::string err = testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, 2);
  EXPECT_NE(err.find("arch mismatch"), std::string::npos) << err;
  fs::remove_all(dir);
}

TEST(CliMonitor, HealthyFalseAlarmRateMatchesRunLengthDistribution) {
  // 1000 in-control windows of 432 steps at k = 0.5, I = 5.
  const auto dir = fresh_dir("false_alarm");
  const auto bundle = known_bundle(dir, 1000.0, 50.0);
  write_stream(dir / "stream.csv", 1000 * 432, 1000.0, 50.0, 5, [](std::size_t) { return 0.0; });
  ASSERT_EQ(cli({"monitor", "--bundle", bundle.string(), "--input", (dir / "stream.csv").string(), "--no-traces",
                 "--out-dir", (dir / "out").string()}),
            0);
  const double rate = static_cast<double>(lines(dir / "out" / "alarms.jsonl").size()) / 1000.0;
  const double expected = oracle::two_sided_alarm_probability(0.5, 5.0, 0.0, 432);
  // Four binomial standard errors.
  EXPECT_NEAR(rate, expected, 4.0 * std::sqrt(expected * (1.0 - expected) / 1000.0));
  const auto summary = read_json(dir / "out" / "monitor_summary.json");
  EXPECT_EQ(summary["units"]["unit_1"]["windows"], 1000);
  fs::remove_all(dir);
}

TEST(CliMonitor, TwoSigmaFaultsAreCaughtBeforeOnset) {
  // 200 faulty windows: +2 sigma from a random step in the first half.
  const auto dir = fresh_dir("faults");
  const auto bundle = known_bundle(dir, 1000.0, 50.0);
  fs::create_directories(dir / "windows");
  std::ofstream index(dir / "windows" / "windows.csv");
  index << "window_id,file,label,fault_onset\n";
  std::mt19937_64 rng(77);
  for (std::size_t w = 0; w < 200; ++w) {
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, 215)(rng);
    const std::string file = "w" + std::to_string(w) + ".csv";
    write_stream(dir / "windows" / file, 432, 1000.0, 50.0, 1000 + w,
                 [start](std::size_t t) { return t >= start ? 2.0 : 0.0; });
    index << "w" << w << ',' << file << ",faulty," << fleetcm::format_timestamp(testdata::at(432)) << '\n';
  }
  index.close();
  ASSERT_EQ(cli({"sweep", "--bundle", bundle.string(), "--windows", (dir / "windows").string(), "--grid", "5",
                 "--out-dir", (dir / "out").string()}),
            0);
  const auto row = read_json(dir / "out" / "sweep.json")["rows"][0];
  std::size_t caught = 0;
  for (const auto& v : row["windows"]) {
    if (v["alarm"].get<bool>() && !v["late_alarm"].get<bool>() && v["notice_time_hours"].get<double>() > 0.0) ++caught;
  }
  EXPECT_GE(caught, 190u);
  fs::remove_all(dir);
}
