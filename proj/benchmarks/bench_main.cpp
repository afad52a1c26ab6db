// Micro-benchmarks for the hot paths: one MIQP solve, one nominal build,
// one receding-horizon slot, and a full closed-loop day.

#include <benchmark/benchmark.h>

#include "microtube/config.hpp"
#include "microtube/controller.hpp"
#include "microtube/evaluate.hpp"
#include "microtube/scenario.hpp"

namespace {

using namespace microtube;

ScenarioDay bench_day(const RunConfig& cfg) {
  const std::vector<DayProfile> year = synth_year(42, cfg.plant.time);
  return generate_scenario(year[180], cfg.uncertainty, 180);
}

HorizonWindow bench_window(const RunConfig& cfg, const ScenarioDay& day) {
  HorizonWindow w;
  w.start = 32;
  w.renewable = day.forecast_renewable.segment(w.start, cfg.controller.h1_len);
  w.load = day.forecast_load.segment(w.start, cfg.controller.h1_len);
  w.initial = split_soc(cfg.initial_soc, cfg.plant.num_segments());
  w.prev_gen.resize(cfg.plant.num_generators());
  for (int j = 0; j < cfg.plant.num_generators(); ++j) {
    w.prev_gen[j] = cfg.plant.generators[j].p_min;
  }
  return w;
}

void BM_BuildNominal(benchmark::State& state) {
  const RunConfig cfg = default_config();
  const ScenarioDay day = bench_day(cfg);
  const HorizonWindow w = bench_window(cfg, day);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_nominal(w, cfg.plant, cfg.controller));
  }
}
BENCHMARK(BM_BuildNominal);

void BM_SolveNominalMiqp(benchmark::State& state) {
  const RunConfig cfg = default_config();
  const ScenarioDay day = bench_day(cfg);
  const HorizonWindow w = bench_window(cfg, day);
  const MiqpProblem p = build_nominal(w, cfg.plant, cfg.controller);
  QpSolver solver(cfg.solver.qp);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_miqp(p, cfg.solver, &solver));
  }
}
BENCHMARK(BM_SolveNominalMiqp);

void BM_ControllerSlot(benchmark::State& state) {
  const RunConfig cfg = default_config();
  const ScenarioDay day = bench_day(cfg);
  TubeController controller(cfg.plant, cfg.controller, cfg.solver);
  const BatteryState s0 = split_soc(cfg.initial_soc, cfg.plant.num_segments());
  Eigen::VectorXd prev_gen(cfg.plant.num_generators());
  for (int j = 0; j < cfg.plant.num_generators(); ++j) {
    prev_gen[j] = cfg.plant.generators[j].p_min;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(controller.run_slot(32, s0, prev_gen, day));
  }
}
BENCHMARK(BM_ControllerSlot);

void BM_ClosedLoopDay(benchmark::State& state) {
  const RunConfig cfg = default_config();
  const ScenarioDay day = bench_day(cfg);
  TubeController controller(cfg.plant, cfg.controller, cfg.solver);
  for (auto _ : state) {
    benchmark::DoNotOptimize(controller.run_day(day, cfg.initial_soc));
  }
}
BENCHMARK(BM_ClosedLoopDay);

void BM_PerfectDispatch(benchmark::State& state) {
  const RunConfig cfg = default_config();
  const ScenarioDay day = bench_day(cfg);
  QpSolver solver(cfg.solver.qp);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        perfect_dispatch_cost(day, cfg.plant, cfg.initial_soc, cfg.solver, &solver));
  }
}
BENCHMARK(BM_PerfectDispatch);

}  // namespace

BENCHMARK_MAIN();
