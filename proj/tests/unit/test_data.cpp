#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "datasets.hpp"
#include "fleetcm/errors.hpp"
#include "fleetcm/data.hpp"
#include "fleetcm/simulate.hpp"

namespace data = fleetcm::data;
namespace sim = fleetcm::sim;
using data::TurbineDataset;

namespace {

const std::filesystem::path kFixture = std::filesystem::path(FLEETCM_FIXTURES_DIR) / "scada_10rows.csv";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Replaces one named column with `value` on every data row.
std::string set_column(const std::string& csv, const std::string& name, const std::string& value) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  std::getline(in, line);
  out << line << '\n';
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  const auto idx = static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.at(idx) = value;
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  }
  return out.str();
}

Eigen::Index column_of(const TurbineDataset& ds, const std::string& name) {
  const auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
  EXPECT_NE(it, ds.feature_names.end()) << name;
  return it - ds.feature_names.begin();
}

TurbineDataset twenty_rows() { return testdata::make(20, 2, [](const auto& x) { return x(0); }, 0.1, 1); }

}  // namespace

TEST(Ingest, FixtureGivesTenRowsOfFortyOneFeatures) {
  const auto r = data::ingest(kFixture, data::ScadaSchema::default_set(), "unit_1");
  EXPECT_EQ(r.dataset.size(), 10u);
  EXPECT_EQ(r.dataset.width(), 41);
  EXPECT_EQ(r.report.rows_read, 10u);
  EXPECT_EQ(r.report.rows_kept, 10u);
  EXPECT_EQ(r.dataset.unit_id, "unit_1");
  EXPECT_EQ(data::ScadaSchema::default_set().engineered_width(), 41);
}

TEST(Ingest, NinetyDegreesMapsToSineOneCosineZero) {
  const auto csv = set_column(read_file(kFixture), "wind_dir_avg", "90");
  std::istringstream in(csv);
  const auto ds = data::ingest(in, data::ScadaSchema::default_set(), "u").dataset;
  const auto s = column_of(ds, "sin_wind_dir_avg");
  const auto c = column_of(ds, "cos_wind_dir_avg");
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
    EXPECT_NEAR(ds.features(r, s), 1.0, 1e-15);
    EXPECT_NEAR(ds.features(r, c), 0.0, 1e-15);
  }
}

TEST(Ingest, ZeroAndThreeSixtyDegreesAreIdentical) {
  const auto base = read_file(kFixture);
  std::istringstream a(set_column(base, "wind_dir_max", "0"));
  std::istringstream b(set_column(base, "wind_dir_max", "360"));
  const auto da = data::ingest(a, data::ScadaSchema::default_set(), "u").dataset;
  const auto db = data::ingest(b, data::ScadaSchema::default_set(), "u").dataset;
  EXPECT_EQ(da.features, db.features);
}

TEST(Ingest, MissingColumnIsASchemaErrorNamingIt) {
  auto csv = read_file(kFixture);
  const auto pos = csv.find("hub_temp_avg");
  ASSERT_NE(pos, std::string::npos);
  csv.replace(pos, std::string("hub_temp_avg").size(), "hub_temp_xxx");
  std::istringstream in(csv);
  try {
    data::ingest(in, data::ScadaSchema::default_set(), "u");
    FAIL() << "expected SchemaError";
  } catch (const fleetcm::SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("hub_temp_avg"), std::string::npos);
  }
}

TEST(Ingest, MissingValuesAreDroppedAndCounted) {
  auto csv = read_file(kFixture);
  std::istringstream probe(csv);
  std::string header;
  std::getline(probe, header);
  std::string row;
  std::getline(probe, row);
  // Blank the power on the first data row and garble the timestamp of another.
  const auto first_comma = row.find(',');
  const auto second_comma = row.find(',', first_comma + 1);
  std::string blanked = row.substr(0, first_comma + 1) + row.substr(second_comma);
  std::string rest((std::istreambuf_iterator<char>(probe)), {});
  std::string garbled = "not-a-time" + rest.substr(rest.find(','));
  garbled = garbled.substr(0, garbled.find('\n') + 1);
  std::istringstream in(header + "\n" + blanked + "\n" + rest + garbled);
  const auto r = data::ingest(in, data::ScadaSchema::default_set(), "u");
  EXPECT_EQ(r.report.dropped_missing, 1u);
  EXPECT_EQ(r.report.skipped_unparseable, 1u);
  EXPECT_EQ(r.dataset.size(), 9u);
  EXPECT_FALSE(r.report.problems.empty());
}

TEST(Ingest, IsDeterministic) {
  const auto a = data::ingest(kFixture, data::ScadaSchema::default_set(), "u").dataset;
  const auto b = data::ingest(kFixture, data::ScadaSchema::default_set(), "u").dataset;
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.target_power, b.target_power);
  EXPECT_EQ(a.timestamps, b.timestamps);
}

TEST(Ingest, DuplicateTimestampsAreADataError) {
  auto csv = read_file(kFixture);
  std::istringstream probe(csv);
  std::string header, row;
  std::getline(probe, header);
  std::getline(probe, row);
  std::istringstream in(header + "\n" + row + "\n" + row + "\n");
  EXPECT_THROW(data::ingest(in, data::ScadaSchema::default_set(), "u"), fleetcm::DataError);
}

TEST(DatasetCsv, RoundTripIsExact) {
  auto ds = data::ingest(kFixture, data::ScadaSchema::default_set(), "unit_1").dataset;
  ds.row_status[3] = data::RowStatus::warning;
  std::stringstream ss;
  data::write_dataset_csv(ss, ds);
  const auto back = data::read_dataset_csv(ss);
  EXPECT_EQ(back.unit_id, ds.unit_id);
  EXPECT_EQ(back.timestamps, ds.timestamps);
  EXPECT_EQ(back.feature_names, ds.feature_names);
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.target_power, ds.target_power);
  EXPECT_EQ(back.row_status, ds.row_status);
}

TEST(Filter, NoEventsLeavesDatasetUnchanged) {
  const auto ds = twenty_rows();
  const auto r = data::filter_events(ds, {});
  EXPECT_EQ(r.dataset.timestamps, ds.timestamps);
  EXPECT_EQ(r.dataset.features, ds.features);
  EXPECT_EQ(r.report.rows_out, 20u);
  EXPECT_FALSE(r.report.empty_result);
}

TEST(Filter, StandbyOverRowsFiveToEightLeavesSixteen) {
  const auto ds = twenty_rows();
  const data::EventLog ev{{"unit_1", testdata::at(5), testdata::at(8), data::EventCategory::standby}};
  const auto r = data::filter_events(ds, ev);
  EXPECT_EQ(r.dataset.size(), 16u);
  EXPECT_EQ(r.report.removed.at("standby"), 4u);
  for (std::size_t i = 5; i <= 8; ++i) {
    EXPECT_EQ(std::count(r.dataset.timestamps.begin(), r.dataset.timestamps.end(), testdata::at(i)), 0);
  }
  // Survivors keep their order and timestamps.
  EXPECT_TRUE(std::is_sorted(r.dataset.timestamps.begin(), r.dataset.timestamps.end()));
  EXPECT_EQ(r.dataset.timestamps[5], testdata::at(9));
}

TEST(Filter, WeekBeforeForcedOutageIsRemoved) {
  // Hourly rows over 10 days; outage starts at day 9.
  TurbineDataset ds = testdata::make(240, 1, [](const auto& x) { return x(0); }, 0.1, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.timestamps[i] = testdata::t0() + std::chrono::hours(i);
  const auto outage = testdata::t0() + std::chrono::hours(24 * 9);
  const data::EventLog ev{{"unit_1", outage, outage + std::chrono::hours(3), data::EventCategory::forced_outage}};
  const auto r = data::filter_events(ds, ev, 7.0, std::chrono::hours(1));
  for (const auto t : r.dataset.timestamps) {
    EXPECT_FALSE(t >= outage - std::chrono::hours(24 * 7) && t < outage) << fleetcm::format_timestamp(t);
  }
  EXPECT_EQ(r.report.removed.at("pre_outage_window"), 24u * 7u);
  EXPECT_EQ(r.report.removed.at("forced_outage"), 4u);
  EXPECT_EQ(r.dataset.size(), 240u - 168u - 4u);
}

TEST(Filter, OtherUnitsEventsAreIgnoredAndEmptyResultIsFlagged) {
  const auto ds = twenty_rows();
  const data::EventLog other{{"unit_9", testdata::at(0), testdata::at(19), data::EventCategory::stop}};
  EXPECT_EQ(data::filter_events(ds, other).dataset.size(), 20u);
  const data::EventLog all{{"unit_1", testdata::at(0), testdata::at(19), data::EventCategory::stop}};
  const auto r = data::filter_events(ds, all);
  EXPECT_TRUE(r.report.empty_result);
  EXPECT_EQ(r.report.removed.at("stop"), 20u);
}

TEST(Filter, NeverAddsRows) {
  const auto ds = twenty_rows();
  const data::EventLog ev{{"unit_1", testdata::at(2), testdata::at(3), data::EventCategory::warning},
                          {"unit_1", testdata::at(15), testdata::at(17), data::EventCategory::forced_outage}};
  const auto r = data::filter_events(ds, ev);
  EXPECT_LE(r.dataset.size(), ds.size());
  EXPECT_EQ(r.report.rows_in, 20u);
  std::size_t removed = 0;
  for (const auto& [k, v] : r.report.removed) removed += v;
  EXPECT_EQ(r.dataset.size() + removed, 20u);
}

TEST(Normalization, ConstantColumnIsDroppedAndRecorded) {
  auto ds = twenty_rows();
  ds.features.col(1).setConstant(3.0);
  const auto stats = data::fit_normalization(ds);
  EXPECT_EQ(stats.output_width(), 1);
  ASSERT_EQ(stats.dropped.size(), 1u);
  EXPECT_EQ(stats.dropped[0], "f1");
  EXPECT_EQ(data::apply_normalization(ds, stats).width(), 1);
  EXPECT_THROW(data::fit_normalization(ds, data::ZeroVariancePolicy::error), fleetcm::DataError);
}

TEST(Normalization, TrainColumnsBecomeStandardAndTestUsesTrainStats) {
  const auto train = testdata::make(500, 3, [](const auto& x) { return x(0); }, 0.1, 1);
  auto test = testdata::make(100, 3, [](const auto& x) { return x(0); }, 0.1, 2, "unit_1", 500);
  test.features.array() += 4.0;
  const auto stats = data::fit_normalization(train);
  const auto z = data::apply_normalization(train, stats);
  const double n = static_cast<double>(z.size());
  for (Eigen::Index c = 0; c < z.width(); ++c) {
    const double m = z.features.col(c).mean();
    EXPECT_LT(std::abs(m), 1e-10);
    EXPECT_NEAR(std::sqrt((z.features.col(c).array() - m).square().sum() / n), 1.0, 1e-10);
  }
  EXPECT_EQ(z.target_power, train.target_power);
  const auto zt = data::apply_normalization(test, stats);
  for (Eigen::Index c = 0; c < zt.width(); ++c) {
    const double expected = (test.features.col(c).mean() - stats.mean[c]) / stats.stddev[c];
    EXPECT_NEAR(zt.features.col(c).mean(), expected, 1e-12);
    EXPECT_GT(std::abs(zt.features.col(c).mean()), 1.0);
  }
}

TEST(Normalization, JsonRoundTripAndSchemaMismatch) {
  const auto train = testdata::make(50, 3, [](const auto& x) { return x(0); }, 0.1, 1);
  const auto stats = data::fit_normalization(train);
  const auto back = data::NormalizationStats::from_json(nlohmann::json::parse(stats.to_json().dump()));
  EXPECT_EQ(back.mean, stats.mean);
  EXPECT_EQ(back.stddev, stats.stddev);
  EXPECT_EQ(back.kept, stats.kept);
  auto other = train;
  other.feature_names[0] = "renamed";
  EXPECT_THROW(data::apply_normalization(other, stats), fleetcm::ConfigError);
}

TEST(Simulator, ZeroNoiseGivesTargetsEqualToTheMean) {
  sim::SimConfig cfg;
  cfg.noise.scale = 0.0;
  cfg.rows_per_unit = {500};
  const auto fleet = sim::simulate_fleet(cfg);
  EXPECT_EQ(fleet.units[0].target_power, fleet.truth[0].mu);
}

TEST(Simulator, BelowCutInMeanIsZero) {
  const sim::PowerCurve curve;
  for (double v : {0.0, 1.0, 2.9}) EXPECT_EQ(curve.mean_power(v), 0.0);
  EXPECT_NEAR(curve.mean_power(30.0), curve.rated_power, 1e-9);
  EXPECT_GT(curve.mean_power(8.0), 0.0);
  EXPECT_LT(curve.mean_power(8.0), curve.rated_power);
}

TEST(Simulator, NoiseIsSmallOffTheRampAndLargestOnIt) {
  const sim::PowerCurve curve;
  const sim::NoiseModel noise;
  const double low = noise.stddev(curve, 1.0);
  const double high = noise.stddev(curve, 20.0);
  double peak = 0.0;
  for (double v = 3.0; v <= 12.5; v += 0.1) peak = std::max(peak, noise.stddev(curve, v));
  EXPECT_GT(peak, 3.0 * low);
  EXPECT_GT(peak, 3.0 * high);
}

TEST(Simulator, ResidualStddevMatchesSigmaInAConstantBin) {
  // Rows off the ramp share sigma* = floor; their residual stddev should match.
  sim::SimConfig cfg;
  cfg.rows_per_unit = {60000};
  cfg.seed = 17;
  const auto fleet = sim::simulate_fleet(cfg);
  const auto& y = fleet.units[0].target_power;
  const auto& truth = fleet.truth[0];
  double sq = 0.0;
  std::size_t n = 0;
  for (Eigen::Index r = 0; r < y.size(); ++r) {
    if (truth.sigma[r] == cfg.noise.floor_kw) {
      const double e = y[r] - truth.mu[r];
      sq += e * e;
      ++n;
    }
  }
  ASSERT_GE(n, 10000u);
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(n)) / cfg.noise.floor_kw, 1.0, 0.05);
}

TEST(Simulator, WithoutFaultsEveryRowIsNormal) {
  sim::SimConfig cfg;
  cfg.n_units = 3;
  cfg.rows_per_unit = {200, 300, 100};
  const auto fleet = sim::simulate_fleet(cfg);
  ASSERT_EQ(fleet.units.size(), 3u);
  EXPECT_EQ(fleet.units[1].size(), 300u);
  EXPECT_TRUE(fleet.events.empty());
  for (const auto& u : fleet.units) {
    for (auto s : u.row_status) EXPECT_EQ(s, data::RowStatus::normal);
    EXPECT_EQ(u.width(), 41);
    u.validate();
  }
  EXPECT_EQ(fleet.units[0].unit_id, "unit_1");
}

TEST(Simulator, PowerShiftFaultMovesMeanAndLogsOutage) {
  sim::SimConfig cfg;
  cfg.rows_per_unit = {1000};
  cfg.faults.push_back({0, 400, 100, sim::FaultType::power_shift, -3.0, 36});
  const auto fleet = sim::simulate_fleet(cfg);
  const auto& y = fleet.units[0].target_power;
  const auto& t = fleet.truth[0];
  double z = 0.0;
  for (Eigen::Index r = 400; r < 500; ++r) z += (y[r] - t.mu[r]) / t.sigma[r];
  EXPECT_NEAR(z / 100.0, -3.0, 0.4);
  ASSERT_EQ(fleet.events.size(), 1u);
  EXPECT_EQ(fleet.events[0].category, data::EventCategory::forced_outage);
  EXPECT_EQ(fleet.events[0].start, fleet.units[0].timestamps[500]);
}

TEST(Simulator, InvalidConfigsAreConfigErrors) {
  sim::SimConfig bad_curve;
  bad_curve.curve.cut_in = 20.0;
  EXPECT_THROW(sim::simulate_fleet(bad_curve), fleetcm::ConfigError);
  sim::SimConfig bad_fault;
  bad_fault.faults.push_back({5, 0, 10, sim::FaultType::stop, 0.0, 0});
  EXPECT_THROW(sim::simulate_fleet(bad_fault), fleetcm::ConfigError);
  sim::SimConfig past_end;
  past_end.faults.push_back({0, 990, 20, sim::FaultType::stop, 0.0, 0});
  EXPECT_THROW(sim::simulate_fleet(past_end), fleetcm::ConfigError);
}

TEST(Simulator, SameSeedSameFleet) {
  sim::SimConfig cfg;
  cfg.rows_per_unit = {300};
  const auto a = sim::simulate_fleet(cfg);
  const auto b = sim::simulate_fleet(cfg);
  EXPECT_EQ(a.units[0].features, b.units[0].features);
  EXPECT_EQ(a.units[0].target_power, b.units[0].target_power);
}

TEST(Simulator, WindowCorpusShapesAndLabels) {
  sim::SimConfig base;
  sim::WindowCorpusConfig wc;
  wc.healthy = 3;
  wc.faulty = 2;
  wc.length = 50;
  const auto windows = sim::simulate_windows(base, wc);
  ASSERT_EQ(windows.size(), 5u);
  std::size_t faulty = 0;
  for (const auto& w : windows) {
    EXPECT_EQ(w.dataset.size(), 50u);
    if (w.faulty) {
      ++faulty;
      EXPECT_EQ(w.fault_onset, w.dataset.timestamps.back() + fleetcm::kDefaultCadence);
    }
  }
  EXPECT_EQ(faulty, 2u);
}
