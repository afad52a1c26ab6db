#include "microtube/model.hpp"

#include <cmath>
#include <sstream>

namespace microtube {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void DegradationParams::validate() const {
  require(alpha >= 0.0, "degradation.alpha must be >= 0");
  require(beta >= 0.0, "degradation.beta must be >= 0");
  require(replacement_cost > 0.0, "degradation.replacement_cost must be > 0");
  require(num_segments >= 1, "degradation.num_segments must be >= 1");
}

void BatteryParams::validate() const {
  require(capacity_kwh > 0.0, "battery.capacity_kwh must be > 0");
  require(charge_eff > 0.0 && charge_eff <= 1.0, "battery.charge_eff must be in (0,1]");
  require(discharge_eff > 0.0 && discharge_eff <= 1.0, "battery.discharge_eff must be in (0,1]");
  require(soc_min >= 0.0 && soc_min < soc_max && soc_max <= 1.0,
          "battery SoC range must satisfy 0 <= soc_min < soc_max <= 1");
  require(soc_min <= soc_terminal_lo && soc_terminal_lo <= soc_terminal_hi &&
              soc_terminal_hi <= soc_max,
          "battery terminal SoC band must be nested in [soc_min, soc_max]");
  require(charge_max_kw > 0.0, "battery.charge_max_kw must be > 0");
  require(discharge_max_kw > 0.0, "battery.discharge_max_kw must be > 0");
  degradation.validate();
}

void GeneratorParams::validate() const {
  require(a2 >= 0.0, "generator a2 must be >= 0 (convex fuel cost)");
  require(p_min >= 0.0 && p_min <= p_max, "generator requires 0 <= p_min <= p_max");
  require(ramp_up >= 0.0 && ramp_down >= 0.0, "generator ramp rates must be >= 0");
}

void TariffSchedule::validate() const {
  require(buy.size() == sell.size() && buy.size() > 0, "tariff series must be nonempty and equal length");
  for (int t = 0; t < buy.size(); ++t) {
    if (!(sell[t] >= 0.0 && buy[t] > sell[t])) {
      std::ostringstream os;
      os << "tariff at slot " << t << " must satisfy buy > sell >= 0 (got buy="
         << buy[t] << ", sell=" << sell[t] << ")";
      throw ConfigError(os.str());
    }
  }
}

TariffSchedule TariffSchedule::peak_offpeak(int slots_per_day, double slot_hours,
                                            double buy_peak, double buy_offpeak,
                                            double sell_peak, double sell_offpeak,
                                            double peak_start_hour, double peak_end_hour) {
  TariffSchedule s;
  s.buy.resize(slots_per_day);
  s.sell.resize(slots_per_day);
  for (int t = 0; t < slots_per_day; ++t) {
    const double hour = t * slot_hours;
    const bool peak = hour >= peak_start_hour && hour < peak_end_hour;
    s.buy[t] = peak ? buy_peak : buy_offpeak;
    s.sell[t] = peak ? sell_peak : sell_offpeak;
  }
  return s;
}

void GridParams::validate() const {
  require(buy_max_kw >= 0.0, "grid.buy_max_kw must be >= 0");
  require(sell_max_kw >= 0.0, "grid.sell_max_kw must be >= 0");
  require(loss_factor >= 0.0 && loss_factor < 1.0, "grid.loss_factor must be in [0,1)");
  tariff.validate();
}

void TimeGrid::validate() const {
  require(slot_hours > 0.0, "time.slot_hours must be > 0");
  require(slots_per_day >= 1, "time.slots_per_day must be >= 1");
  require(std::abs(slots_per_day * slot_hours - 24.0) < 1e-9,
          "time grid must cover exactly 24 hours");
}

void ScenarioDay::validate(int slots_per_day) const {
  auto check = [&](const VectorXd& v, const char* name) {
    if (v.size() != slots_per_day) {
      std::ostringstream os;
      os << name << " has " << v.size() << " slots, expected " << slots_per_day;
      throw DataError(os.str());
    }
    if ((v.array() < 0.0).any()) throw DataError(std::string(name) + " contains negative values");
  };
  check(forecast_renewable, "forecast_renewable");
  check(actual_renewable, "actual_renewable");
  check(forecast_load, "forecast_load");
  check(actual_load, "actual_load");
}

void BatteryState::validate() const {
  const int n = num_segments();
  if (n < 1) throw ConstraintViolation("battery state needs at least one segment");
  const double cap = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    if (segments[i] < -kSocTol || segments[i] > cap + kSocTol) {
      std::ostringstream os;
      os << "segment " << i + 1 << " share " << segments[i] << " outside [0, " << cap << "]";
      throw ConstraintViolation(os.str());
    }
  }
}

DispatchDecision DispatchDecision::zeros(int num_generators, int num_segments) {
  DispatchDecision d;
  d.gen = VectorXd::Zero(num_generators);
  d.seg_charge = VectorXd::Zero(num_segments);
  d.seg_discharge = VectorXd::Zero(num_segments);
  return d;
}

double cycle_life_loss(double depth, const DegradationParams& params) {
  if (depth < 0.0 || depth > 1.0) throw DomainError("cycle depth must lie in [0,1]");
  return params.alpha * std::pow(depth, 1.0 + params.beta);
}

double segment_cost(int i, const BatteryParams& battery) {
  const int n = battery.degradation.num_segments;
  if (i < 1 || i > n) throw DomainError("segment index out of range");
  const DegradationParams& deg = battery.degradation;
  const double hi = cycle_life_loss(static_cast<double>(i) / n, deg);
  const double lo = cycle_life_loss(static_cast<double>(i - 1) / n, deg);
  return deg.replacement_cost / (battery.discharge_eff * battery.capacity_kwh) *
         (hi - lo) * n;
}

VectorXd segment_costs(const BatteryParams& battery) {
  const int n = battery.degradation.num_segments;
  VectorXd c(n);
  for (int i = 0; i < n; ++i) c[i] = segment_cost(i + 1, battery);
  return c;
}

BatteryState soc_step(const BatteryState& state, const DispatchDecision& decision,
                      const BatteryParams& battery, const TimeGrid& grid_time) {
  const int n = state.num_segments();
  const double tau = grid_time.slot_hours;
  const double charge_gain = battery.charge_eff * tau / battery.capacity_kwh;
  const double discharge_gain = tau / (battery.discharge_eff * battery.capacity_kwh);
  const double cap = 1.0 / n;

  BatteryState next;
  next.segments.resize(n);
  for (int i = 0; i < n; ++i) {
    double s = state.segments[i] + charge_gain * decision.seg_charge[i] -
               discharge_gain * decision.seg_discharge[i];
    if (s < -kSocTol || s > cap + kSocTol) {
      std::ostringstream os;
      os << "soc_step drives segment " << i + 1 << " to " << s
         << ", outside [0, " << cap << "]";
      throw ConstraintViolation(os.str());
    }
    next.segments[i] = std::clamp(s, 0.0, cap);
  }
  return next;
}

SocBounds time_aware_bounds(const BatteryParams& battery, const TimeGrid& grid_time) {
  const int T = grid_time.slots_per_day;
  const double tau = grid_time.slot_hours;
  const double step_up = battery.charge_eff * battery.charge_max_kw * tau / battery.capacity_kwh;
  const double step_down =
      battery.discharge_max_kw * tau / (battery.discharge_eff * battery.capacity_kwh);

  SocBounds b;
  b.lo.resize(T);
  b.hi.resize(T);
  b.lo[T - 1] = battery.soc_terminal_lo;
  b.hi[T - 1] = battery.soc_terminal_hi;
  for (int t = T - 2; t >= 0; --t) {
    b.lo[t] = std::max(battery.soc_min, b.lo[t + 1] - step_up);
    b.hi[t] = std::min(battery.soc_max, b.hi[t + 1] + step_down);
  }
  for (int t = 0; t < T; ++t) {
    if (b.lo[t] > b.hi[t] + kSocTol) {
      std::ostringstream os;
      os << "terminal SoC band unreachable: slot " << t << " bounds ["
         << b.lo[t] << ", " << b.hi[t] << "]";
      throw InfeasibleError(os.str());
    }
  }
  return b;
}

double stage_cost(const DispatchDecision& decision,
                  const std::vector<GeneratorParams>& generators,
                  const GridParams& grid, const BatteryParams& battery,
                  const TimeGrid& grid_time, int slot, double epsilon) {
  const double tau = grid_time.slot_hours;
  double cost = 0.0;
  for (std::size_t j = 0; j < generators.size(); ++j) {
    const double g = decision.gen[static_cast<int>(j)];
    cost += (generators[j].a2 * g * g + generators[j].a1 * g + generators[j].a0) * tau;
  }
  cost += (grid.tariff.buy[slot] * decision.buy - grid.tariff.sell[slot] * decision.sell) * tau;
  const VectorXd c = segment_costs(battery);
  for (int i = 0; i < c.size(); ++i) {
    cost += c[i] * (decision.seg_discharge[i] + epsilon * decision.seg_charge[i]) * tau;
  }
  return cost;
}

BatteryState split_soc(double aggregate_soc, int num_segments) {
  if (aggregate_soc < -kSocTol || aggregate_soc > 1.0 + kSocTol) {
    throw DomainError("aggregate SoC must lie in [0,1]");
  }
  BatteryState state;
  state.segments = VectorXd::Zero(num_segments);
  const double cap = 1.0 / num_segments;
  double remaining = std::clamp(aggregate_soc, 0.0, 1.0);
  for (int i = 0; i < num_segments && remaining > 0.0; ++i) {
    const double take = std::min(cap, remaining);
    state.segments[i] = take;
    remaining -= take;
  }
  return state;
}

}  // namespace microtube
