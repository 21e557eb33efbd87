#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "tensegrity/harness.hpp"
#include "tensegrity/policies.hpp"
#include "tensegrity/stability.hpp"

namespace {

using namespace tensegrity;

// Fixed gait so the benchmarks do not pay for gait derivation.
ScenarioConfig bench_config() {
  ScenarioConfig config;
  config.gait = {10, 5, 6, 14, 20, 17};
  return config;
}

void BM_Step(benchmark::State& bench) {
  SimState state = trial_start_state(bench_config());
  for (auto _ : bench) {
    step_in_place(state);
    benchmark::DoNotOptimize(state.time);
  }
}
BENCHMARK(BM_Step);

void BM_SupportPolygon(benchmark::State& bench) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> coord(-20.0, 20.0);
  std::vector<Eigen::Vector3d> points(static_cast<std::size_t>(bench.range(0)));
  for (auto& p : points) p = {coord(rng), coord(rng), 0.0};
  for (auto _ : bench) benchmark::DoNotOptimize(support_polygon(points));
}
BENCHMARK(BM_SupportPolygon)->Arg(3)->Arg(6)->Arg(10);

void BM_TargetsAt(benchmark::State& bench) {
  const ScenarioConfig config = bench_config();
  const PolicySchedule schedule = compile_policy(PolicyKind::Alternating, config.policy_params, config.gait, 20,
                                                 config.physical.max_contraction);
  double t = 0.0;
  for (auto _ : bench) {
    benchmark::DoNotOptimize(targets_at(schedule, t));
    t += 1e-3;
    if (t > schedule.cycle_period * 20) t = 0.0;
  }
}
BENCHMARK(BM_TargetsAt);

void BM_Trial(benchmark::State& bench) {
  ScenarioConfig config = bench_config();
  config.world.incline_deg = 10.0;
  for (auto _ : bench) benchmark::DoNotOptimize(run_trial(config));
}
BENCHMARK(BM_Trial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
