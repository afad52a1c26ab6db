#pragma once

// Assembles the nominal MPC, ancillary MPC, and offline perfect-dispatch
// problems over a time window into standard-form mixed-integer convex QPs.
// Builders are pure functions of their inputs.

#include <Eigen/Dense>
#include <vector>

#include "microtube/model.hpp"
#include "microtube/problem.hpp"

namespace microtube {

/// Everything physical: battery, generators, grid connection, time grid.
struct Plant {
  BatteryParams battery;
  std::vector<GeneratorParams> generators;
  GridParams grid;
  TimeGrid time;

  int num_generators() const { return static_cast<int>(generators.size()); }
  int num_segments() const { return battery.degradation.num_segments; }
  void validate() const;
};

struct ControllerConfig {
  double rho1 = 0.05;   // SoC bound tightening
  double rho2 = 0.10;   // generation bound tightening
  double epsilon = 0.001;
  double mu_x = 400.0;
  double mu_u = 1.0;
  int h1_len = 8;
  int h2_len = 2;

  void validate() const;
};

/// A rolling window of the day: forecasts (or realized values, for the
/// ancillary problem's first slot), the battery state entering the window,
/// and the generator outputs applied in the slot before it.
struct HorizonWindow {
  int start = 0;
  Eigen::VectorXd renewable;
  Eigen::VectorXd load;
  BatteryState initial;
  Eigen::VectorXd prev_gen;

  int length() const { return static_cast<int>(renewable.size()); }
};

/// Reference values the ancillary MPC tracks, one entry per window slot.
struct NominalTrajectory {
  Eigen::VectorXd soc;
  Eigen::VectorXd buy;
  Eigen::VectorXd sell;
  Eigen::MatrixXd gen;  // generators x slots
};

/// Forecast-only problem with tightened SoC and generation bounds.
/// Throws InfeasibleError when tightened bounds cross.
MiqpProblem build_nominal(const HorizonWindow& window, const Plant& plant,
                          const ControllerConfig& cfg);

/// Deviation-tracking problem with original constraints and the realized
/// power balance. With balance_slack, two penalized slack columns per slot
/// keep the balance row satisfiable under extreme shocks.
MiqpProblem build_ancillary(const HorizonWindow& window,
                            const NominalTrajectory& nominal, const Plant& plant,
                            const ControllerConfig& cfg, bool balance_slack = false);

/// Full-day offline problem over the ACTUAL series, original constraints.
MiqpProblem build_perfect_dispatch(const ScenarioDay& day, const Plant& plant,
                                   const BatteryState& initial);

/// Read a per-slot decision out of a solved variable vector.
DispatchDecision extract_decision(const Eigen::VectorXd& x, const VarMap& vars, int slot);

/// Read the reference trajectory for the first `len` slots of a solution.
NominalTrajectory extract_trajectory(const Eigen::VectorXd& x, const VarMap& vars, int len);

}  // namespace microtube
