#include <benchmark/benchmark.h>

#include "rwdre/env.hpp"
#include "rwdre/kernel.hpp"
#include "rwdre/regen.hpp"
#include "rwdre/renorm.hpp"
#include "rwdre/rng.hpp"
#include "rwdre/slt.hpp"
#include "rwdre/walker.hpp"

using namespace rwdre;

static void BM_HeatKernel(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernel::heat_kernel(0.5, n));
}
BENCHMARK(BM_HeatKernel)->Arg(64)->Arg(256)->Arg(1024);

// one walk of n steps at density rho, environment included
static void BM_Walk(benchmark::State& st) {
  const std::int64_t n = st.range(0);
  const double rho = static_cast<double>(st.range(1));
  std::uint64_t s = 0;
  for (auto _ : st) {
    const env::Environment e(walker::walk_window(rho, 0.5, n, 0, ++s));
    const env::WalkCursor cur(e);
    benchmark::DoNotOptimize(walker::run_walk(cur, walker::UniformField(s), {0.3, 0.8}, {0, 0}, n));
  }
  st.SetItemsProcessed(st.iterations() * n);
}
BENCHMARK(BM_Walk)->Args({1000, 1})->Args({5000, 1})->Args({1000, 10})->Unit(benchmark::kMillisecond);

static void BM_OccupancyGrid(benchmark::State& st) {
  const std::int64_t n = st.range(0);
  std::uint64_t s = 0;
  for (auto _ : st) {
    env::EnvConfig c;
    c.x_min = -2 * n;
    c.x_max = 2 * n;
    c.t_min = 0;
    c.t_max = n;
    c.seed = ++s;
    const env::Environment e(c);
    benchmark::DoNotOptimize(env::OccupancyGrid(e, -n, n, 0, n));
  }
}
BENCHMARK(BM_OccupancyGrid)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_Regeneration(benchmark::State& st) {
  std::uint64_t s = 0;
  for (auto _ : st) {
    ++s;
    const env::Environment e(regen::regen_window(1.0, 0.5, 20000, s));
    benchmark::DoNotOptimize(
        regen::regeneration_time(e, walker::UniformField(s), {0.7, 0.9}, regen::RegenConfig{}, {0, 0}, 20000));
  }
}
BENCHMARK(BM_Regeneration)->Unit(benchmark::kMillisecond);

static void BM_SoftLocalTimeSequence(benchmark::State& st) {
  const std::vector<std::int64_t> sigma = kernel::interval_sites(0, 63);
  const std::vector<slt::Density> gs(16, slt::Density{0, std::vector<double>(64, 1.0 / 64.0)});
  std::uint64_t s = 0;
  for (auto _ : st) benchmark::DoNotOptimize(slt::simulate_sequence(slt::sample_point_process(sigma, 1.0, ++s), gs));
}
BENCHMARK(BM_SoftLocalTimeSequence);

static void BM_Ladder(benchmark::State& st) {
  renorm::LadderConfig c;
  c.k_max = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(renorm::build_ladder(c));
}
BENCHMARK(BM_Ladder)->Arg(12)->Arg(40);

static void BM_TailSum(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(renorm::tail_sum_check(1.0, 60.0));
}
BENCHMARK(BM_TailSum)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
