#include "microtube/controller.hpp"
#include <cstdio>
#include <cstdlib>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "microtube/errors.hpp"

namespace microtube {

namespace {

/// Widen the aggregate SoC corridor of a built problem to the static range
/// and drop the terminal band. Last-resort recovery; bounds only, the
/// matrix structure is untouched.
void relax_soc_bounds(MiqpProblem& p, const BatteryParams& bat) {
  for (int k = 0; k < p.vars.num_slots(); ++k) {
    const int c = p.vars.col(k, VarRole::Soc);
    p.lb[c] = bat.soc_min;
    p.ub[c] = bat.soc_max;
  }
}

}  // namespace

TubeController::TubeController(Plant plant, ControllerConfig cfg, BnbSettings solver_settings)
    : plant_(std::move(plant)),
      cfg_(cfg),
      settings_(solver_settings),
      nominal_qp_(solver_settings.qp),
      ancillary_qp_(solver_settings.qp),
      recovery_qp_(solver_settings.qp) {}

HorizonWindow TubeController::make_window(int abs_slot, int len, const BatteryState& state,
                                          const Eigen::VectorXd& prev_gen,
                                          const ScenarioDay& day, bool realized_first) const {
  HorizonWindow w;
  w.start = abs_slot;
  w.renewable = day.forecast_renewable.segment(abs_slot, len);
  w.load = day.forecast_load.segment(abs_slot, len);
  if (realized_first) {
    // Only the current slot's realization is observable.
    w.renewable[0] = day.actual_renewable[abs_slot];
    w.load[0] = day.actual_load[abs_slot];
  }
  w.initial = state;
  w.prev_gen = prev_gen;
  return w;
}

BnbReport TubeController::solve_nominal(const HorizonWindow& window, bool& relaxed) {
  relaxed = false;
  try {
    MiqpProblem p = build_nominal(window, plant_, cfg_);
    BnbReport r = solve_miqp(p, settings_, &nominal_qp_);
    if (r.status != SolveStatus::Infeasible) return r;
  } catch (const InfeasibleError&) {
    // tightened bounds crossed; fall through to the untightened problem
  }

  relaxed = true;
  ControllerConfig loose = cfg_;
  loose.rho1 = 0.0;
  loose.rho2 = 0.0;
  MiqpProblem p = build_nominal(window, plant_, loose);
  BnbReport r = solve_miqp(p, settings_, &recovery_qp_);
  if (r.status != SolveStatus::Infeasible) return r;

  relax_soc_bounds(p, plant_.battery);
  return solve_miqp(p, settings_, &recovery_qp_);
}

BnbReport TubeController::solve_ancillary(const HorizonWindow& window,
                                          const NominalTrajectory& nom, bool& slack_used) {
  slack_used = false;
  {
    MiqpProblem p = build_ancillary(window, nom, plant_, cfg_, false);
    BnbReport r = solve_miqp(p, settings_, &ancillary_qp_);
    if (r.status != SolveStatus::Infeasible) return r;
  }

  // Extreme shock: re-solve with a penalized slack on the balance row.
  slack_used = true;
  MiqpProblem p = build_ancillary(window, nom, plant_, cfg_, true);
  BnbReport r = solve_miqp(p, settings_, &recovery_qp_);
  if (r.status != SolveStatus::Infeasible) return r;

  relax_soc_bounds(p, plant_.battery);
  return solve_miqp(p, settings_, &recovery_qp_);
}

DispatchDecision TubeController::sanitize(DispatchDecision d, const BatteryState& state) const {
  const int G = plant_.num_generators();
  const int N = plant_.num_segments();
  const BatteryParams& bat = plant_.battery;
  const double tau = plant_.time.slot_hours;
  const double charge_gain = bat.charge_eff * tau / bat.capacity_kwh;
  const double discharge_gain = tau / (bat.discharge_eff * bat.capacity_kwh);
  const double cap = 1.0 / N;

  for (int j = 0; j < G; ++j) {
    d.gen[j] = std::clamp(d.gen[j], plant_.generators[j].p_min, plant_.generators[j].p_max);
  }
  d.buy = std::clamp(d.buy, 0.0, plant_.grid.buy_max_kw);
  d.sell = std::clamp(d.sell, 0.0, plant_.grid.sell_max_kw);
  for (int i = 0; i < N; ++i) {
    if (d.discharging) d.seg_charge[i] = 0.0;
    if (!d.discharging) d.seg_discharge[i] = 0.0;
    // keep each segment share inside [0, 1/N] after the update
    const double c_room = std::max(0.0, (cap - state.segments[i]) / charge_gain);
    const double d_room = std::max(0.0, state.segments[i] / discharge_gain);
    d.seg_charge[i] = std::clamp(d.seg_charge[i], 0.0, c_room);
    d.seg_discharge[i] = std::clamp(d.seg_discharge[i], 0.0, d_room);
  }
  if (d.buying) d.sell = 0.0; else d.buy = 0.0;
  return d;
}

TubeController::SlotOutcome TubeController::run_slot(int abs_slot, const BatteryState& state,
                                                     const Eigen::VectorXd& prev_gen,
                                                     const ScenarioDay& day) {
  const int T = plant_.time.slots_per_day;
  if (abs_slot < 0 || abs_slot >= T) throw DataError("slot index out of range");

  const int len1 = std::min(cfg_.h1_len, T - abs_slot);
  const int len2 = std::min(cfg_.h2_len, T - abs_slot);

  SlotOutcome out;
  out.record.slot = abs_slot;
  out.record.delta_renewable =
      day.actual_renewable[abs_slot] - day.forecast_renewable[abs_slot];
  out.record.delta_load = day.actual_load[abs_slot] - day.forecast_load[abs_slot];

  const HorizonWindow w1 = make_window(abs_slot, len1, state, prev_gen, day, false);
  bool relaxed = false;
  BnbReport nominal = solve_nominal(w1, relaxed);
  out.record.nominal_relaxed = relaxed;

  if (nominal.status == SolveStatus::Infeasible && getenv("CTRL_DEBUG")) {
    fprintf(stderr, "slot %d nominal infeasible; state:", abs_slot);
    for (int i = 0; i < state.segments.size(); ++i) fprintf(stderr, " %.17g", state.segments[i]);
    fprintf(stderr, "; prev_gen:");
    for (int j = 0; j < prev_gen.size(); ++j) fprintf(stderr, " %.17g", prev_gen[j]);
    fprintf(stderr, "\n");
  }
  if (nominal.status == SolveStatus::Infeasible) {
    // No plan exists even with relaxed bounds: apply a physical fallback
    // (idle battery, hold generators, trade to cover what fits) and flag.
    out.failed = true;
    DispatchDecision fb = DispatchDecision::zeros(plant_.num_generators(), plant_.num_segments());
    for (int j = 0; j < plant_.num_generators(); ++j) {
      fb.gen[j] = std::clamp(prev_gen[j], plant_.generators[j].p_min,
                             plant_.generators[j].p_max);
    }
    const double net = (1.0 + plant_.grid.loss_factor) * day.actual_load[abs_slot] -
                       day.actual_renewable[abs_slot] - fb.gen.sum();
    if (net >= 0.0) {
      fb.buy = std::min(net, plant_.grid.buy_max_kw);
      fb.buying = fb.buy > 0.0;
    } else {
      fb.sell = std::min(-net, plant_.grid.sell_max_kw);
    }
    out.record.nominal = fb;
    out.record.actual = fb;
    out.record.nominal_soc = state.soc();
    out.next_state = state;
    out.record.actual_soc = state.soc();
    out.record.cost = stage_cost(fb, plant_.generators, plant_.grid, plant_.battery,
                                 plant_.time, abs_slot, cfg_.epsilon);
    return out;
  }

  const VarMap vm1(len1, plant_.num_generators(), plant_.num_segments(), false);
  NominalTrajectory traj = extract_trajectory(nominal.incumbent.x, vm1, len2);
  out.record.nominal = extract_decision(nominal.incumbent.x, vm1, 0);
  out.record.nominal_soc = traj.soc[0];

  const HorizonWindow w2 = make_window(abs_slot, len2, state, prev_gen, day, true);
  bool slack_used = false;
  BnbReport ancillary = solve_ancillary(w2, traj, slack_used);
  out.record.slack_used = slack_used;

  if (ancillary.status == SolveStatus::Infeasible && getenv("CTRL_DEBUG")) {
    fprintf(stderr, "slot %d ancillary infeasible; state:", abs_slot);
    for (int i = 0; i < state.segments.size(); ++i) fprintf(stderr, " %.17g", state.segments[i]);
    fprintf(stderr, "; prev_gen:");
    for (int j = 0; j < prev_gen.size(); ++j) fprintf(stderr, " %.17g", prev_gen[j]);
    fprintf(stderr, "; nom_soc:");
    for (double v : traj.soc) fprintf(stderr, " %.17g", v);
    fprintf(stderr, "\n");
  }
  if (ancillary.status == SolveStatus::Infeasible) {
    out.failed = true;
    // Track the nominal plan as well as physics allows.
    DispatchDecision fb = sanitize(out.record.nominal, state);
    out.record.actual = fb;
    out.next_state = soc_step(state, fb, plant_.battery, plant_.time);
    out.record.actual_soc = out.next_state.soc();
    out.record.cost = stage_cost(fb, plant_.generators, plant_.grid, plant_.battery,
                                 plant_.time, abs_slot, cfg_.epsilon);
    return out;
  }

  const VarMap vm2(len2, plant_.num_generators(), plant_.num_segments(), slack_used);
  DispatchDecision actual = sanitize(extract_decision(ancillary.incumbent.x, vm2, 0), state);
  out.record.actual = actual;
  out.next_state = soc_step(state, actual, plant_.battery, plant_.time);
  out.record.actual_soc = out.next_state.soc();
  out.record.cost = stage_cost(actual, plant_.generators, plant_.grid, plant_.battery,
                               plant_.time, abs_slot, cfg_.epsilon);
  return out;
}

DayResult TubeController::run_day(const ScenarioDay& day, double initial_soc) {
  const int T = plant_.time.slots_per_day;
  day.validate(T);
  if (initial_soc < plant_.battery.soc_min - kSocTol ||
      initial_soc > plant_.battery.soc_max + kSocTol) {
    throw DomainError("initial SoC outside the battery's static range");
  }

  DayResult result;
  result.records.reserve(T);

  BatteryState state = split_soc(initial_soc, plant_.num_segments());
  Eigen::VectorXd prev_gen(plant_.num_generators());
  for (int j = 0; j < plant_.num_generators(); ++j) prev_gen[j] = plant_.generators[j].p_min;

  for (int t = 0; t < T; ++t) {
    SlotOutcome out = run_slot(t, state, prev_gen, day);
    if (out.failed) result.failed_slots.push_back(t);
    result.daily_cost += out.record.cost;
    prev_gen = out.record.actual.gen;
    state = out.next_state;
    result.records.push_back(std::move(out.record));
  }
  result.final_state = state;
  return result;
}

}  // namespace microtube
