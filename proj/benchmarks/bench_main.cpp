#include <benchmark/benchmark.h>

#include <random>

#include "fleetcm/model.hpp"
#include "fleetcm/monitor.hpp"
#include "fleetcm/nn.hpp"
#include "fleetcm/simulate.hpp"

namespace {

using namespace fleetcm;

model::ArchitectureSpec preset_for(int which) { return which == 1 ? model::preset_a1() : model::preset_a2(); }

nn::Matrix random_matrix(nn::Index rows, nn::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  nn::Matrix m(rows, cols);
  for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

// One minibatch of 32: forward, backward and an Adam update.
void BM_TrainStep(benchmark::State& state) {
  const auto arch = preset_for(static_cast<int>(state.range(0)));
  auto params = model::build(arch, 1);
  const nn::Matrix x = random_matrix(arch.d0, 32, 2);
  const nn::Vector y = random_matrix(32, 1, 3).col(0);
  auto adam = nn::AdamState::for_size(params.flat_size(), 1e-3);
  for (auto _ : state) {
    const auto g = nn::backward(params, arch.delta, x, y);
    nn::adam_step(params, g.flat, adam);
    benchmark::DoNotOptimize(g.loss);
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

void BM_Forward(benchmark::State& state) {
  const auto arch = preset_for(static_cast<int>(state.range(0)));
  const auto params = model::build(arch, 1);
  const nn::Matrix x = random_matrix(arch.d0, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(params, arch.delta, x));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

// Batch prediction of 10000 rows with the A1 network, by thread count.
void BM_PredictBatch(benchmark::State& state) {
  const auto arch = model::preset_a1();
  const auto params = model::build(arch, 1);
  const nn::Matrix x = random_matrix(10000, arch.d0, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model::predict_batch(params, arch, x, static_cast<std::size_t>(state.range(0))));
  }
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_PredictBatch)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_CusumStep(benchmark::State& state) {
  const monitor::MonitorConfig config;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  std::vector<double> v(4096);
  for (double& x : v) x = n01(rng);
  monitor::CusumState s;
  std::size_t i = 0;
  for (auto _ : state) {
    s = monitor::cusum_step(s, v[i++ & 4095], config);
    if (s.alarmed_at) s = {};
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CusumStep);

void BM_RunWindow(benchmark::State& state) {
  const monitor::MonitorConfig config;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  std::vector<double> v(config.window_length);
  for (double& x : v) x = n01(rng);
  for (auto _ : state) benchmark::DoNotOptimize(monitor::run_window(v, config));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.size()));
}
BENCHMARK(BM_RunWindow)->Unit(benchmark::kMicrosecond);

void BM_SimulateFleet(benchmark::State& state) {
  sim::SimConfig cfg;
  cfg.rows_per_unit = {static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_fleet(cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateFleet)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
