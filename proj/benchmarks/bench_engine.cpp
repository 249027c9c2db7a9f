#include <benchmark/benchmark.h>

#include "metsize/perm_fdr.hpp"
#include "metsize/pilot_sim.hpp"
#include "metsize/size_search.hpp"

using namespace metsize;

namespace {

// One simulated dataset: T permutations and their FDRs.
void BM_DatasetFdr(benchmark::State& state) {
  EstimationConfig cfg;
  cfg.p = static_cast<int>(state.range(0));
  const int half = static_cast<int>(state.range(1)) / 2;
  RandomStream sim(1);
  const PilotMatrix pm = simulate_pilot(half, half, cfg.p, cfg.model, {}, sim);
  RandomStream rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(dataset_fdr(pm, cfg, rng));
}
BENCHMARK(BM_DatasetFdr)->Args({300, 10})->Args({300, 40})->Args({2000, 20})
    ->Unit(benchmark::kMicrosecond);

// SIM datasets at one grid point, single-threaded.
void BM_FdrPercentilesAt(benchmark::State& state) {
  EstimationConfig cfg;
  cfg.p = static_cast<int>(state.range(0));
  cfg.threads = 1;
  for (auto _ : state) {
    RandomStream rng = point_stream(7, 10, 10);
    benchmark::DoNotOptimize(fdr_percentiles_at(10, 10, cfg, rng));
  }
}
BENCHMARK(BM_FdrPercentilesAt)->Arg(300)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_EstimateSampleSize(benchmark::State& state) {
  EstimationConfig cfg;
  cfg.p = 300;
  cfg.n_min = 10;
  cfg.seed = 7;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_sample_size(cfg));
}
BENCHMARK(BM_EstimateSampleSize)->Unit(benchmark::kMillisecond);

void BM_FitPpca(benchmark::State& state) {
  RandomStream rng(3);
  const int n = static_cast<int>(state.range(1));
  const PilotMatrix pm =
      simulate_pilot(n / 2, n / 2, static_cast<int>(state.range(0)), {}, {}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_ppca(pm, 2));
}
BENCHMARK(BM_FitPpca)->Args({189, 18})->Args({1000, 40})->Unit(benchmark::kMillisecond);

void BM_FitPpcca(benchmark::State& state) {
  RandomStream rng(4);
  const PilotMatrix pm = simulate_pilot(20, 20, 189, {ModelKind::PPCCA, 1, 2}, {}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_ppcca(pm, 2, {100, 1e-300}));
}
BENCHMARK(BM_FitPpcca)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
