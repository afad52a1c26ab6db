#pragma once

// Receding-horizon loop over a day: nominal MPC -> ancillary MPC -> apply
// first element -> advance state. A day simulation is strictly sequential;
// distinct days may run fully in parallel with separate controllers.

#include <vector>

#include "microtube/bnb.hpp"
#include "microtube/builder.hpp"
#include "microtube/model.hpp"

namespace microtube {

struct SlotRecord {
  int slot = 0;
  DispatchDecision nominal;
  DispatchDecision actual;
  double nominal_soc = 0.0;  // SoC after this slot per the nominal plan
  double actual_soc = 0.0;   // realized SoC after this slot
  double delta_renewable = 0.0;
  double delta_load = 0.0;
  double cost = 0.0;         // stage cost on actuals
  bool slack_used = false;       // balance slack engaged in recovery
  bool nominal_relaxed = false;  // nominal solved without tightening
};

struct DayResult {
  std::vector<SlotRecord> records;
  double daily_cost = 0.0;
  std::vector<int> failed_slots;
  BatteryState final_state;

  bool feasible() const { return failed_slots.empty(); }
};

class TubeController {
public:
  TubeController(Plant plant, ControllerConfig cfg, BnbSettings solver_settings = {});

  struct SlotOutcome {
    SlotRecord record;
    BatteryState next_state;
    bool failed = false;
  };

  /// One receding-horizon step at an absolute slot of the day.
  SlotOutcome run_slot(int abs_slot, const BatteryState& state,
                       const Eigen::VectorXd& prev_gen, const ScenarioDay& day);

  /// Full closed-loop day from the given initial aggregate SoC.
  DayResult run_day(const ScenarioDay& day, double initial_soc);

  const Plant& plant() const { return plant_; }
  const ControllerConfig& config() const { return cfg_; }

private:
  HorizonWindow make_window(int abs_slot, int len, const BatteryState& state,
                            const Eigen::VectorXd& prev_gen, const ScenarioDay& day,
                            bool realized_first) const;
  BnbReport solve_nominal(const HorizonWindow& window, bool& relaxed);
  BnbReport solve_ancillary(const HorizonWindow& window, const NominalTrajectory& nom,
                            bool& slack_used);
  DispatchDecision sanitize(DispatchDecision d, const BatteryState& state) const;

  Plant plant_;
  ControllerConfig cfg_;
  BnbSettings settings_;
  QpSolver nominal_qp_;
  QpSolver ancillary_qp_;
  QpSolver recovery_qp_;
};

}  // namespace microtube
