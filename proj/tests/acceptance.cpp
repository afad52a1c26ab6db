// End-to-end acceptance checks. Each check prints exactly one [PASS]/[FAIL]
// line; the process exits nonzero if any check fails. Criterion numbers may
// be passed as arguments to run a subset, e.g. `acceptance 1 2 7`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "microtube/config.hpp"
#include "microtube/controller.hpp"
#include "microtube/evaluate.hpp"
#include "microtube/scenario.hpp"

using namespace microtube;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

HorizonWindow random_window(std::mt19937& rng, const RunConfig& cfg, int len) {
  std::uniform_int_distribution<int> start_dist(0, cfg.plant.time.slots_per_day - len);
  std::uniform_real_distribution<double> load_dist(20.0, 180.0);
  std::uniform_real_distribution<double> renew_dist(0.0, 100.0);
  std::uniform_real_distribution<double> soc_dist(0.45, 0.75);
  HorizonWindow w;
  w.start = start_dist(rng);
  w.load.resize(len);
  w.renewable.resize(len);
  for (int k = 0; k < len; ++k) {
    w.load[k] = load_dist(rng);
    w.renewable[k] = renew_dist(rng);
  }
  w.initial = split_soc(soc_dist(rng), cfg.plant.num_segments());
  w.prev_gen.resize(cfg.plant.num_generators());
  for (int j = 0; j < cfg.plant.num_generators(); ++j) {
    w.prev_gen[j] = cfg.plant.generators[j].p_min;
  }
  return w;
}

// 1. Segment degradation costs against the closed-form construction.
void check_degradation() {
  const RunConfig cfg = default_config();
  const VectorXd c = segment_costs(cfg.plant.battery);
  bool increasing = true;
  for (int i = 0; i + 1 < c.size(); ++i) increasing = increasing && c[i] < c[i + 1];
  const bool pass = increasing && c.size() == 10 && std::abs(c[0] - 0.010295) < 1e-5 &&
                    std::abs(c[9] - 0.21242) < 1e-4;
  report(1, pass,
         fmt("segment costs increasing, C1=%.6f (want 0.010295), C10=%.5f (want 0.21242)",
             c[0], c[9]));
}

// 2. Time-aware SoC bounds backward recursion.
void check_bounds() {
  const RunConfig cfg = default_config();
  const SocBounds b = time_aware_bounds(cfg.plant.battery, cfg.plant.time);
  const double width93 = b.hi[93] - b.lo[93];
  bool saturated = true;
  for (int t = 0; t <= 95 - 14; ++t) {
    saturated = saturated && b.lo[t] == 0.20 && b.hi[t] == 0.90;
  }
  const bool pass = std::abs(b.lo[94] - 0.4525) < 1e-6 &&
                    std::abs(b.hi[94] - 0.652632) < 1e-6 && saturated &&
                    std::abs(width93 - 0.3003) < 1e-4;
  report(2, pass,
         fmt("slot 94 band [%.4f, %.6f], width at 23:30 = %.5f (want 0.3003), "
             "static beyond 14 slots: %s",
             b.lo[94], b.hi[94], width93, saturated ? "yes" : "no"));
}

// 3. Branch-and-bound against exhaustive enumeration on random instances.
void check_solver() {
  const auto t0 = Clock::now();
  const RunConfig cfg = default_config();
  std::mt19937 rng(20240817);
  int feasible = 0, attempts = 0, mismatches = 0, kkt_bad = 0;
  while (feasible < 200 && attempts < 600) {
    ++attempts;
    const int len = 1 + static_cast<int>(rng() % 3);
    const MiqpProblem p = build_nominal(random_window(rng, cfg, len), cfg.plant, cfg.controller);
    const BnbReport rep = solve_miqp(p, cfg.solver);
    const QpSolution oracle = enumerate_oracle(p, cfg.solver.qp);
    if (oracle.status != SolveStatus::Optimal) continue;
    ++feasible;
    const double scale = std::max(1.0, std::abs(oracle.objective));
    if (rep.status != SolveStatus::Optimal ||
        std::abs(rep.incumbent.objective - oracle.objective) > 1e-6 * scale) {
      ++mismatches;
    }
    if (rep.incumbent.primal_residual > 1e-6 || rep.incumbent.dual_residual > 1e-6) {
      ++kkt_bad;
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = feasible >= 200 && mismatches == 0 && kkt_bad == 0 && elapsed < 120.0;
  report(3, pass,
         fmt("%d feasible instances, %d objective mismatches, %d loose KKT residuals, "
             "%.1f s (budget 120 s)",
             feasible, mismatches, kkt_bad, elapsed));
}

// 4. Zero forecast error: actual trajectory equals the nominal plan.
void check_collapse() {
  const auto t0 = Clock::now();
  RunConfig cfg = default_config();
  UncertaintyConfig quiet = cfg.uncertainty;
  quiet.renewable_level = 0.0;
  quiet.load_level = 0.0;
  const DayProfile profile = synth_year(cfg.uncertainty.seed, cfg.plant.time)[120];
  const ScenarioDay day = generate_scenario(profile, quiet, 120);

  TubeController ctrl(cfg.plant, cfg.controller, cfg.solver);
  const DayResult res = ctrl.run_day(day, cfg.initial_soc);
  double max_dev = 0.0;
  for (const SlotRecord& r : res.records) {
    max_dev = std::max(max_dev, std::abs(r.actual_soc - r.nominal_soc));
  }
  const double terminal = res.final_state.soc();
  const double elapsed = seconds_since(t0);
  const bool pass = res.feasible() && max_dev <= 1e-6 && terminal >= 0.50 - 1e-9 &&
                    terminal <= 0.60 + 1e-9 && elapsed < 10.0;
  report(4, pass,
         fmt("max |actual-nominal| SoC = %.2e, terminal SoC = %.4f, %.1f s (budget 10 s)",
             max_dev, terminal, elapsed));
}

// 5. Tube containment over 50 stochastic days.
void check_containment() {
  const auto t0 = Clock::now();
  const RunConfig cfg = default_config();
  const SocBounds bounds = time_aware_bounds(cfg.plant.battery, cfg.plant.time);
  const auto year = synth_year(cfg.uncertainty.seed, cfg.plant.time);

  int nominal_violations = 0, actual_violations = 0, failed_slots = 0, relaxed_slots = 0;
  for (int d = 0; d < 50; ++d) {
    const int day_index = 7 * d % 365;  // spread across the year
    const ScenarioDay day = generate_scenario(year[day_index], cfg.uncertainty, day_index);
    TubeController ctrl(cfg.plant, cfg.controller, cfg.solver);
    const DayResult res = ctrl.run_day(day, cfg.initial_soc);
    failed_slots += static_cast<int>(res.failed_slots.size());
    for (const SlotRecord& r : res.records) {
      if (r.nominal_relaxed) {
        ++relaxed_slots;
      } else if (r.nominal_soc < (1.0 + cfg.controller.rho1) * bounds.lo[r.slot] - 1e-6 ||
                 r.nominal_soc > (1.0 - cfg.controller.rho1) * bounds.hi[r.slot] + 1e-6) {
        ++nominal_violations;
      }
      if (r.actual_soc < cfg.plant.battery.soc_min - 1e-6 ||
          r.actual_soc > cfg.plant.battery.soc_max + 1e-6) {
        ++actual_violations;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = nominal_violations == 0 && actual_violations == 0 && failed_slots == 0 &&
                    relaxed_slots == 0 && elapsed < 600.0;
  report(5, pass,
         fmt("50 days: %d tightened-band violations, %d original-band violations, "
             "%d failed slots, %d relaxed slots, %.0f s (budget 600 s)",
             nominal_violations, actual_violations, failed_slots, relaxed_slots, elapsed));
}

// 6. Year-long campaign competitive-ratio distribution.
void check_campaign() {
  const auto t0 = Clock::now();
  const RunConfig cfg = default_config();
  const auto year = synth_year(cfg.uncertainty.seed, cfg.plant.time);
  std::vector<ScenarioDay> days;
  days.reserve(365);
  for (int d = 0; d < 365; ++d) days.push_back(generate_scenario(year[d], cfg.uncertainty, d));

  const CampaignReport rep =
      run_campaign(days, cfg.plant, cfg.controller, cfg.solver, cfg.initial_soc);
  const double elapsed = seconds_since(t0);

  std::vector<double> ratios;
  double min_ratio = 2.0;
  int below_110 = 0;
  for (const DayOutcome& d : rep.days) {
    if (!d.feasible || d.excluded) continue;
    ratios.push_back(d.ratio);
    min_ratio = std::min(min_ratio, d.ratio);
    if (d.ratio < 1.10) ++below_110;
  }
  const Summary s = summarize(ratios);
  const double frac_below = ratios.empty() ? 0.0 : double(below_110) / double(ratios.size());
  const bool pass = rep.infeasible_days == 0 && !ratios.empty() && min_ratio >= 1.0 - 1e-9 &&
                    frac_below >= 0.95 && s.median >= 1.0 && s.median <= 1.07 &&
                    elapsed < 3600.0;
  report(6, pass,
         fmt("%zu rated days (%d infeasible, %d excluded): min %.4f, median %.4f "
             "(want [1.0, 1.07]), %.1f%% below 1.10 (want >= 95%%), %.0f s (budget 3600 s)",
             ratios.size(), rep.infeasible_days, rep.excluded_days, min_ratio, s.median,
             100.0 * frac_below, elapsed));
}

// 7. Competitive-ratio arithmetic on the reference cost pairs.
void check_ratio_arithmetic() {
  const double r1 = competitive_ratio(574.39, 554.25);
  const double r2 = competitive_ratio(293.87, 277.55);
  const bool pass = std::abs(r1 - 1.0363) < 5e-5 && std::abs(r2 - 1.0588) < 5e-5;
  report(7, pass, fmt("574.39/554.25 = %.5f (want 1.0363), 293.87/277.55 = %.5f (want 1.0588)",
                      r1, r2));
}

// 8. Ancillary-horizon sweep: longer horizons do not add outlier days.
void check_horizon_sweep() {
  const auto t0 = Clock::now();
  const RunConfig cfg = default_config();
  const auto year = synth_year(cfg.uncertainty.seed, cfg.plant.time);
  std::vector<ScenarioDay> days;
  days.reserve(365);
  for (int d = 0; d < 365; ++d) days.push_back(generate_scenario(year[d], cfg.uncertainty, d));

  const std::vector<int> h2_values = {1, 2, 3, 4};
  const auto entries = sweep_horizon(h2_values, days, cfg.plant, cfg.controller, cfg.solver,
                                     cfg.initial_soc);
  const double elapsed = seconds_since(t0);

  std::string detail;
  bool medians_ok = true;
  for (const auto& e : entries) {
    medians_ok = medians_ok && e.summary.median < 1.10;
    detail += fmt("h2=%d: median %.4f, %d outliers; ", e.h2, e.summary.median, e.outliers);
  }
  const bool outliers_ok =
      entries.size() == 4 && entries.back().outliers <= entries.front().outliers;
  const bool pass = outliers_ok && medians_ok;
  report(8, pass, detail + fmt("%.0f s", elapsed));
}

// 9. Cross-cutting invariants: efficiency round trip, cost telescoping,
// problem sizing, oracle dominance, seeded determinism.
void check_properties() {
  const RunConfig cfg = default_config();
  std::string detail;
  bool pass = true;

  {  // battery round trip loses exactly the combined efficiency factor
    const BatteryParams& b = cfg.plant.battery;
    const TimeGrid grid = cfg.plant.time;
    const BatteryState s0 = split_soc(0.5, 10);
    DispatchDecision charge = DispatchDecision::zeros(2, 10);
    charge.seg_charge[5] = 80.0;
    DispatchDecision discharge = DispatchDecision::zeros(2, 10);
    discharge.seg_discharge[5] = b.charge_eff * b.discharge_eff * 80.0;
    const BatteryState s2 = soc_step(soc_step(s0, charge, b, grid), discharge, b, grid);
    const bool ok = std::abs(s2.soc() - 0.5) < 1e-9;
    pass = pass && ok;
    detail += fmt("efficiency round trip %s; ", ok ? "ok" : "VIOLATED");
  }
  {  // segment costs telescope to the full-depth replacement loss
    const VectorXd c = segment_costs(cfg.plant.battery);
    const double total = c.sum() * (400.0 / 10.0) * 0.95;
    const double full = 80000.0 * cycle_life_loss(1.0, cfg.plant.battery.degradation);
    const bool ok = std::abs(total - full) <= 1e-6 * full;
    pass = pass && ok;
    detail += fmt("telescoping %s; ", ok ? "ok" : "VIOLATED");
  }
  {  // column-count formula
    std::mt19937 rng(4);
    const MiqpProblem p = build_nominal(random_window(rng, cfg, 5), cfg.plant, cfg.controller);
    const bool ok = p.num_vars() == 5 * (2 + 2 + 2 * 10 + 10 + 1 + 2);
    pass = pass && ok;
    detail += fmt("column count %s; ", ok ? "ok" : "VIOLATED");
  }
  {  // oracle dominance and seeded determinism on a short campaign
    const auto year = synth_year(cfg.uncertainty.seed, cfg.plant.time);
    std::vector<ScenarioDay> days;
    for (int d : {33, 150, 260}) days.push_back(generate_scenario(year[d], cfg.uncertainty, d));
    const CampaignReport a =
        run_campaign(days, cfg.plant, cfg.controller, cfg.solver, cfg.initial_soc);
    const CampaignReport b =
        run_campaign(days, cfg.plant, cfg.controller, cfg.solver, cfg.initial_soc);
    bool dominance = true, deterministic = true;
    for (std::size_t i = 0; i < a.days.size(); ++i) {
      dominance = dominance && a.days[i].opt_cost <= a.days[i].alg_cost + 1e-6;
      deterministic = deterministic && a.days[i].alg_cost == b.days[i].alg_cost &&
                      a.days[i].opt_cost == b.days[i].opt_cost;
    }
    pass = pass && dominance && deterministic;
    detail += fmt("oracle dominance %s; determinism %s", dominance ? "ok" : "VIOLATED",
                  deterministic ? "ok" : "VIOLATED");
  }
  report(9, pass, detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto selected = [&](int k) { return wanted.empty() || wanted.count(k) > 0; };

  try {
    if (selected(1)) check_degradation();
    if (selected(2)) check_bounds();
    if (selected(3)) check_solver();
    if (selected(4)) check_collapse();
    if (selected(5)) check_containment();
    if (selected(6)) check_campaign();
    if (selected(7)) check_ratio_arithmetic();
    if (selected(8)) check_horizon_sweep();
    if (selected(9)) check_properties();
  } catch (const std::exception& e) {
    std::printf("[FAIL] unexpected exception: %s\n", e.what());
    return 1;
  }
  return g_failures == 0 ? 0 : 1;
}
