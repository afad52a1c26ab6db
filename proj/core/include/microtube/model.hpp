#pragma once

// Domain types and closed-form battery / microgrid formulas: segmental
// degradation costs, SoC dynamics, time-aware SoC bounds, stage cost.
// All types are immutable value objects; operations are pure functions.

#include <Eigen/Dense>
#include <vector>

#include "microtube/errors.hpp"

namespace microtube {

using Eigen::VectorXd;

inline constexpr double kSocTol = 1e-9;     // absolute tolerance on SoC fractions
inline constexpr double kCostRelTol = 1e-6; // relative tolerance on costs

/// Cycle-life loss curve phi(depth) = alpha * depth^(1+beta) and the
/// N-segment marginal cost construction built on it.
struct DegradationParams {
  double alpha = 5.24e-4;
  double beta = 1.03;
  double replacement_cost = 80000.0;  // $
  int num_segments = 10;

  void validate() const;
};

struct BatteryParams {
  double capacity_kwh = 400.0;
  double charge_eff = 0.95;
  double discharge_eff = 0.95;
  double soc_min = 0.20;
  double soc_max = 0.90;
  double soc_terminal_lo = 0.50;
  double soc_terminal_hi = 0.60;
  double charge_max_kw = 80.0;
  double discharge_max_kw = 80.0;
  DegradationParams degradation;

  void validate() const;
};

struct GeneratorParams {
  double a2 = 0.0;   // $/(kW^2 h)
  double a1 = 0.0;   // $/kWh
  double a0 = 0.0;   // $ per hour of operation
  double p_min = 0.0;
  double p_max = 0.0;
  double ramp_up = 0.0;    // kW per slot
  double ramp_down = 0.0;  // kW per slot

  void validate() const;
};

/// Buy/sell prices per slot, $/kWh. buy must strictly exceed sell.
struct TariffSchedule {
  VectorXd buy;
  VectorXd sell;

  void validate() const;
  /// Flat construction from peak/off-peak prices over a [start,end) hour window.
  static TariffSchedule peak_offpeak(int slots_per_day, double slot_hours,
                                     double buy_peak, double buy_offpeak,
                                     double sell_peak, double sell_offpeak,
                                     double peak_start_hour, double peak_end_hour);
};

struct GridParams {
  double buy_max_kw = 250.0;
  double sell_max_kw = 250.0;
  double loss_factor = 0.01;  // distribution loss on the demand side
  TariffSchedule tariff;

  void validate() const;
};

struct TimeGrid {
  double slot_hours = 0.25;
  int slots_per_day = 96;

  void validate() const;
};

/// One day of per-slot renewable and load series, forecast and realized.
struct ScenarioDay {
  VectorXd forecast_renewable;
  VectorXd actual_renewable;
  VectorXd forecast_load;
  VectorXd actual_load;

  void validate(int slots_per_day) const;
};

/// Per-segment SoC shares, each expressed as a fraction of TOTAL capacity
/// and therefore bounded in [0, 1/N]. Aggregate SoC is the plain sum.
struct BatteryState {
  VectorXd segments;

  double soc() const { return segments.sum(); }
  int num_segments() const { return static_cast<int>(segments.size()); }
  void validate() const;
};

/// Per-slot controls. Segment powers are in kW; aggregates are sums.
struct DispatchDecision {
  VectorXd gen;            // per generator, kW
  double buy = 0.0;        // kW
  double sell = 0.0;       // kW
  VectorXd seg_charge;     // per segment, kW
  VectorXd seg_discharge;  // per segment, kW
  bool discharging = false;  // u_t
  bool buying = false;       // v_t

  double charge() const { return seg_charge.sum(); }
  double discharge() const { return seg_discharge.sum(); }
  static DispatchDecision zeros(int num_generators, int num_segments);
};

/// Per-slot SoC corridor. lo[t]/hi[t] bound the SoC reached after slot t's
/// action; the last entry is the terminal band.
struct SocBounds {
  VectorXd lo;
  VectorXd hi;
};

/// Cycle life loss at the given discharge depth.
double cycle_life_loss(double depth, const DegradationParams& params);

/// Marginal degradation cost of segment i (1-based), $/kWh discharged.
double segment_cost(int i, const BatteryParams& battery);

/// All N segment costs, ascending segment index.
VectorXd segment_costs(const BatteryParams& battery);

/// Advance per-segment SoC one slot under the given decision. Throws
/// ConstraintViolation if an updated share leaves [0, 1/N] beyond kSocTol.
BatteryState soc_step(const BatteryState& state, const DispatchDecision& decision,
                      const BatteryParams& battery, const TimeGrid& grid_time);

/// Backward-propagated per-slot SoC bounds that make the terminal band
/// reachable under the power limits. Throws InfeasibleError if the band
/// is unreachable.
SocBounds time_aware_bounds(const BatteryParams& battery, const TimeGrid& grid_time);

/// Single-slot operation cost: generator fuel + trading +- degradation,
/// all power quantities converted to per-slot energy by tau.
double stage_cost(const DispatchDecision& decision,
                  const std::vector<GeneratorParams>& generators,
                  const GridParams& grid, const BatteryParams& battery,
                  const TimeGrid& grid_time, int slot, double epsilon);

/// Decompose an aggregate SoC into segment shares, filling segment 1 first.
BatteryState split_soc(double aggregate_soc, int num_segments);

}  // namespace microtube
