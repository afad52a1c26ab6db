#include "microtube/builder.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "microtube/errors.hpp"

namespace microtube {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class BuildMode { Nominal, Ancillary, Perfect };

struct BuildSpec {
  BuildMode mode;
  const NominalTrajectory* nominal = nullptr;  // ancillary only
  bool balance_slack = false;
};

MiqpProblem build_horizon(const HorizonWindow& window, const Plant& plant,
                          const ControllerConfig& cfg, const BuildSpec& spec) {
  const int len = window.length();
  if (len < 1) throw DataError("horizon window must contain at least one slot");
  if (window.load.size() != len) throw DataError("window series lengths disagree");
  const int G = plant.num_generators();
  const int N = plant.num_segments();
  const int T = plant.time.slots_per_day;
  if (window.start < 0 || window.start + len > T) {
    throw DataError("window exceeds the day; truncate before building");
  }
  if (window.prev_gen.size() != G) throw DataError("prev_gen must cover all generators");

  const BatteryParams& bat = plant.battery;
  const GridParams& grid = plant.grid;
  const double tau = plant.time.slot_hours;
  const double charge_gain = bat.charge_eff * tau / bat.capacity_kwh;
  const double discharge_gain = tau / (bat.discharge_eff * bat.capacity_kwh);
  const double seg_cap = 1.0 / N;
  const VectorXd seg_c = segment_costs(bat);
  const SocBounds soc_bounds = time_aware_bounds(bat, plant.time);

  const bool tighten = spec.mode == BuildMode::Nominal;
  const double rho1 = tighten ? cfg.rho1 : 0.0;
  const double rho2 = tighten ? cfg.rho2 : 0.0;

  MiqpProblem p;
  p.vars = VarMap(len, G, N, spec.balance_slack);
  const VarMap& vm = p.vars;
  const int ncols = vm.num_cols();

  p.quad_cost = VectorXd::Zero(ncols);
  p.lin_cost = VectorXd::Zero(ncols);
  p.lb = VectorXd::Constant(ncols, -kInf);
  p.ub = VectorXd::Constant(ncols, kInf);

  const int eq_per_slot = 2 + N;
  const int ineq_per_slot = 4 + 2 * G;
  p.eq_rhs = VectorXd::Zero(len * eq_per_slot);
  p.ineq_rhs = VectorXd::Zero(len * ineq_per_slot);
  std::vector<Eigen::Triplet<double>> eq_t, ineq_t;

  const double slack_price =
      10.0 * grid.tariff.buy.maxCoeff() * tau;  // $ per kW of unmet balance

  for (int k = 0; k < len; ++k) {
    const int abs_slot = window.start + k;

    // --- objective ---
    if (spec.mode == BuildMode::Ancillary) {
      const NominalTrajectory& nom = *spec.nominal;
      const int cS = vm.col(k, VarRole::Soc);
      p.quad_cost[cS] = 2.0 * cfg.mu_x;
      p.lin_cost[cS] = -2.0 * cfg.mu_x * nom.soc[k];
      p.cost_offset += cfg.mu_x * nom.soc[k] * nom.soc[k];
      const int cB = vm.col(k, VarRole::Buy);
      const int cSell = vm.col(k, VarRole::Sell);
      p.quad_cost[cB] = 2.0 * cfg.mu_u;
      p.lin_cost[cB] = -2.0 * cfg.mu_u * nom.buy[k];
      p.cost_offset += cfg.mu_u * nom.buy[k] * nom.buy[k];
      p.quad_cost[cSell] = 2.0 * cfg.mu_u;
      p.lin_cost[cSell] = -2.0 * cfg.mu_u * nom.sell[k];
      p.cost_offset += cfg.mu_u * nom.sell[k] * nom.sell[k];
      for (int j = 0; j < G; ++j) {
        const int cG = vm.col(k, VarRole::Gen, j);
        p.quad_cost[cG] = 2.0 * cfg.mu_u;
        p.lin_cost[cG] = -2.0 * cfg.mu_u * nom.gen(j, k);
        p.cost_offset += cfg.mu_u * nom.gen(j, k) * nom.gen(j, k);
      }
    } else {
      for (int j = 0; j < G; ++j) {
        const GeneratorParams& gen = plant.generators[j];
        const int cG = vm.col(k, VarRole::Gen, j);
        p.quad_cost[cG] = 2.0 * gen.a2 * tau;
        p.lin_cost[cG] = gen.a1 * tau;
        p.cost_offset += gen.a0 * tau;
      }
      p.lin_cost[vm.col(k, VarRole::Buy)] = grid.tariff.buy[abs_slot] * tau;
      p.lin_cost[vm.col(k, VarRole::Sell)] = -grid.tariff.sell[abs_slot] * tau;
      for (int i = 0; i < N; ++i) {
        p.lin_cost[vm.col(k, VarRole::SegDischarge, i)] = seg_c[i] * tau;
        p.lin_cost[vm.col(k, VarRole::SegCharge, i)] = cfg.epsilon * seg_c[i] * tau;
      }
    }
    if (spec.balance_slack) {
      p.lin_cost[vm.col(k, VarRole::SlackPos)] = slack_price;
      p.lin_cost[vm.col(k, VarRole::SlackNeg)] = slack_price;
    }

    // --- equalities ---
    const int e_bal = k * eq_per_slot;
    const int e_agg = e_bal + 1;
    const int e_seg0 = e_bal + 2;

    // power balance: b - s + sum d_i - sum c_i + sum g_j (+ slack) = (1+theta) l - r
    eq_t.emplace_back(e_bal, vm.col(k, VarRole::Buy), 1.0);
    eq_t.emplace_back(e_bal, vm.col(k, VarRole::Sell), -1.0);
    for (int i = 0; i < N; ++i) {
      eq_t.emplace_back(e_bal, vm.col(k, VarRole::SegDischarge, i), 1.0);
      eq_t.emplace_back(e_bal, vm.col(k, VarRole::SegCharge, i), -1.0);
    }
    for (int j = 0; j < G; ++j) eq_t.emplace_back(e_bal, vm.col(k, VarRole::Gen, j), 1.0);
    if (spec.balance_slack) {
      eq_t.emplace_back(e_bal, vm.col(k, VarRole::SlackPos), 1.0);
      eq_t.emplace_back(e_bal, vm.col(k, VarRole::SlackNeg), -1.0);
    }
    p.eq_rhs[e_bal] = (1.0 + grid.loss_factor) * window.load[k] - window.renewable[k];

    // aggregate SoC definition
    eq_t.emplace_back(e_agg, vm.col(k, VarRole::Soc), 1.0);
    for (int i = 0; i < N; ++i) eq_t.emplace_back(e_agg, vm.col(k, VarRole::SegSoc, i), -1.0);

    // per-segment SoC dynamics
    for (int i = 0; i < N; ++i) {
      const int row = e_seg0 + i;
      eq_t.emplace_back(row, vm.col(k, VarRole::SegSoc, i), 1.0);
      eq_t.emplace_back(row, vm.col(k, VarRole::SegCharge, i), -charge_gain);
      eq_t.emplace_back(row, vm.col(k, VarRole::SegDischarge, i), discharge_gain);
      if (k == 0) {
        p.eq_rhs[row] = window.initial.segments[i];
      } else {
        eq_t.emplace_back(row, vm.col(k - 1, VarRole::SegSoc, i), -1.0);
      }
    }

    // --- inequalities ---
    const int r0 = k * ineq_per_slot;
    const int col_u = vm.col(k, VarRole::ModeDischarge);
    const int col_v = vm.col(k, VarRole::ModeBuy);

    // charge <= c_max (1 - u)
    for (int i = 0; i < N; ++i) ineq_t.emplace_back(r0, vm.col(k, VarRole::SegCharge, i), 1.0);
    ineq_t.emplace_back(r0, col_u, bat.charge_max_kw);
    p.ineq_rhs[r0] = bat.charge_max_kw;
    p.big_m.push_back({col_u, r0, bat.charge_max_kw});

    // discharge <= d_max u
    for (int i = 0; i < N; ++i)
      ineq_t.emplace_back(r0 + 1, vm.col(k, VarRole::SegDischarge, i), 1.0);
    ineq_t.emplace_back(r0 + 1, col_u, -bat.discharge_max_kw);
    p.ineq_rhs[r0 + 1] = 0.0;
    p.big_m.push_back({col_u, r0 + 1, bat.discharge_max_kw});

    // buy <= b_max v
    ineq_t.emplace_back(r0 + 2, vm.col(k, VarRole::Buy), 1.0);
    ineq_t.emplace_back(r0 + 2, col_v, -grid.buy_max_kw);
    p.ineq_rhs[r0 + 2] = 0.0;
    p.big_m.push_back({col_v, r0 + 2, grid.buy_max_kw});

    // sell <= s_max (1 - v)
    ineq_t.emplace_back(r0 + 3, vm.col(k, VarRole::Sell), 1.0);
    ineq_t.emplace_back(r0 + 3, col_v, grid.sell_max_kw);
    p.ineq_rhs[r0 + 3] = grid.sell_max_kw;
    p.big_m.push_back({col_v, r0 + 3, grid.sell_max_kw});

    // ramping
    for (int j = 0; j < G; ++j) {
      const int up = r0 + 4 + 2 * j;
      const int down = up + 1;
      ineq_t.emplace_back(up, vm.col(k, VarRole::Gen, j), 1.0);
      ineq_t.emplace_back(down, vm.col(k, VarRole::Gen, j), -1.0);
      if (k == 0) {
        p.ineq_rhs[up] = plant.generators[j].ramp_up + window.prev_gen[j];
        p.ineq_rhs[down] = plant.generators[j].ramp_down - window.prev_gen[j];
      } else {
        ineq_t.emplace_back(up, vm.col(k - 1, VarRole::Gen, j), -1.0);
        ineq_t.emplace_back(down, vm.col(k - 1, VarRole::Gen, j), 1.0);
        p.ineq_rhs[up] = plant.generators[j].ramp_up;
        p.ineq_rhs[down] = plant.generators[j].ramp_down;
      }
    }

    // --- bounds ---
    for (int j = 0; j < G; ++j) {
      const double glo = (1.0 + rho2) * plant.generators[j].p_min;
      const double ghi = (1.0 - rho2) * plant.generators[j].p_max;
      if (glo > ghi) {
        std::ostringstream os;
        os << "tightened generation bounds cross for generator " << j + 1 << ": ["
           << glo << ", " << ghi << "]";
        throw InfeasibleError(os.str());
      }
      p.lb[vm.col(k, VarRole::Gen, j)] = glo;
      p.ub[vm.col(k, VarRole::Gen, j)] = ghi;
    }
    p.lb[vm.col(k, VarRole::Buy)] = 0.0;
    p.ub[vm.col(k, VarRole::Buy)] = grid.buy_max_kw;
    p.lb[vm.col(k, VarRole::Sell)] = 0.0;
    p.ub[vm.col(k, VarRole::Sell)] = grid.sell_max_kw;
    for (int i = 0; i < N; ++i) {
      p.lb[vm.col(k, VarRole::SegCharge, i)] = 0.0;
      p.ub[vm.col(k, VarRole::SegCharge, i)] = bat.charge_max_kw;
      p.lb[vm.col(k, VarRole::SegDischarge, i)] = 0.0;
      p.ub[vm.col(k, VarRole::SegDischarge, i)] = bat.discharge_max_kw;
      p.lb[vm.col(k, VarRole::SegSoc, i)] = 0.0;
      p.ub[vm.col(k, VarRole::SegSoc, i)] = seg_cap;
    }
    const double soc_lo = (1.0 + rho1) * soc_bounds.lo[abs_slot];
    const double soc_hi = (1.0 - rho1) * soc_bounds.hi[abs_slot];
    if (soc_lo > soc_hi) {
      std::ostringstream os;
      os << "tightened SoC bounds cross at slot " << abs_slot << ": [" << soc_lo << ", "
         << soc_hi << "]";
      throw InfeasibleError(os.str());
    }
    p.lb[vm.col(k, VarRole::Soc)] = soc_lo;
    p.ub[vm.col(k, VarRole::Soc)] = soc_hi;

    p.lb[col_u] = 0.0;
    p.ub[col_u] = 1.0;
    p.lb[col_v] = 0.0;
    p.ub[col_v] = 1.0;
    p.binary_cols.push_back(col_u);
    p.binary_cols.push_back(col_v);

    if (spec.balance_slack) {
      p.lb[vm.col(k, VarRole::SlackPos)] = 0.0;
      p.lb[vm.col(k, VarRole::SlackNeg)] = 0.0;
    }
  }

  p.eq_mat.resize(len * eq_per_slot, ncols);
  p.eq_mat.setFromTriplets(eq_t.begin(), eq_t.end());
  p.eq_mat.makeCompressed();
  p.ineq_mat.resize(len * ineq_per_slot, ncols);
  p.ineq_mat.setFromTriplets(ineq_t.begin(), ineq_t.end());
  p.ineq_mat.makeCompressed();
  return p;
}

}  // namespace

void Plant::validate() const {
  battery.validate();
  if (generators.empty()) throw ConfigError("at least one generator is required");
  for (const auto& g : generators) g.validate();
  grid.validate();
  time.validate();
  if (grid.tariff.buy.size() != time.slots_per_day) {
    throw ConfigError("tariff series must have one entry per slot");
  }
}

void ControllerConfig::validate() const {
  if (!(rho1 > 0.0 && rho1 < 1.0 && rho2 > 0.0 && rho2 < 1.0)) {
    throw ConfigError("controller tightening parameters must lie in (0,1)");
  }
  if (epsilon < 0.0) throw ConfigError("controller.epsilon must be >= 0");
  if (mu_x < 0.0 || mu_u < 0.0) throw ConfigError("controller deviation weights must be >= 0");
  if (h1_len < 1 || h2_len < 1) throw ConfigError("controller horizons must be >= 1");
  if (h2_len > h1_len) throw ConfigError("controller.h2 must not exceed controller.h1");
}

MiqpProblem build_nominal(const HorizonWindow& window, const Plant& plant,
                          const ControllerConfig& cfg) {
  BuildSpec spec;
  spec.mode = BuildMode::Nominal;
  return build_horizon(window, plant, cfg, spec);
}

MiqpProblem build_ancillary(const HorizonWindow& window, const NominalTrajectory& nominal,
                            const Plant& plant, const ControllerConfig& cfg,
                            bool balance_slack) {
  if (nominal.soc.size() < window.length()) {
    throw DataError("nominal trajectory must cover the ancillary window");
  }
  BuildSpec spec;
  spec.mode = BuildMode::Ancillary;
  spec.nominal = &nominal;
  spec.balance_slack = balance_slack;
  return build_horizon(window, plant, cfg, spec);
}

MiqpProblem build_perfect_dispatch(const ScenarioDay& day, const Plant& plant,
                                   const BatteryState& initial) {
  day.validate(plant.time.slots_per_day);
  HorizonWindow window;
  window.start = 0;
  window.renewable = day.actual_renewable;
  window.load = day.actual_load;
  window.initial = initial;
  window.prev_gen.resize(plant.num_generators());
  for (int j = 0; j < plant.num_generators(); ++j) {
    window.prev_gen[j] = plant.generators[j].p_min;
  }
  BuildSpec spec;
  spec.mode = BuildMode::Perfect;
  return build_horizon(window, plant, ControllerConfig{}, spec);
}

DispatchDecision extract_decision(const Eigen::VectorXd& x, const VarMap& vars, int slot) {
  DispatchDecision d = DispatchDecision::zeros(vars.num_generators(), vars.num_segments());
  for (int j = 0; j < vars.num_generators(); ++j) d.gen[j] = x[vars.col(slot, VarRole::Gen, j)];
  d.buy = x[vars.col(slot, VarRole::Buy)];
  d.sell = x[vars.col(slot, VarRole::Sell)];
  for (int i = 0; i < vars.num_segments(); ++i) {
    d.seg_charge[i] = x[vars.col(slot, VarRole::SegCharge, i)];
    d.seg_discharge[i] = x[vars.col(slot, VarRole::SegDischarge, i)];
  }
  d.discharging = x[vars.col(slot, VarRole::ModeDischarge)] > 0.5;
  d.buying = x[vars.col(slot, VarRole::ModeBuy)] > 0.5;
  return d;
}

NominalTrajectory extract_trajectory(const Eigen::VectorXd& x, const VarMap& vars, int len) {
  NominalTrajectory t;
  t.soc.resize(len);
  t.buy.resize(len);
  t.sell.resize(len);
  t.gen.resize(vars.num_generators(), len);
  for (int k = 0; k < len; ++k) {
    t.soc[k] = x[vars.col(k, VarRole::Soc)];
    t.buy[k] = x[vars.col(k, VarRole::Buy)];
    t.sell[k] = x[vars.col(k, VarRole::Sell)];
    for (int j = 0; j < vars.num_generators(); ++j) t.gen(j, k) = x[vars.col(k, VarRole::Gen, j)];
  }
  return t;
}

}  // namespace microtube
