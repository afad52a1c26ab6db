#pragma once

// Closed-loop evaluation: the offline perfect-dispatch baseline, the
// competitive ratio, Monte Carlo campaigns, and the two parameter sweeps.

#include <vector>

#include "microtube/bnb.hpp"
#include "microtube/builder.hpp"
#include "microtube/controller.hpp"
#include "microtube/scenario.hpp"

namespace microtube {

/// Online realized cost over the offline optimum; 1.0 is ideal.
/// Throws DomainError when opt_cost <= 0 (ratio undefined).
double competitive_ratio(double alg_cost, double opt_cost);

/// Offline full-day optimum on the ACTUAL series. Pass a persistent solver
/// to share the factorization across days.
double perfect_dispatch_cost(const ScenarioDay& day, const Plant& plant,
                             double initial_soc, const BnbSettings& settings,
                             QpSolver* solver = nullptr);

struct DayOutcome {
  int day = 0;
  double alg_cost = 0.0;
  double opt_cost = 0.0;
  double ratio = 0.0;
  bool feasible = true;   // all slots of the closed loop succeeded
  bool excluded = false;  // |opt_cost| too small for a stable ratio
};

struct Summary {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  int count = 0;
};

Summary summarize(std::vector<double> values);

/// Days with ratios outside [q1 - 1.5 IQR, q3 + 1.5 IQR].
int count_outliers(const std::vector<double>& values);

struct CampaignReport {
  std::vector<DayOutcome> days;
  Summary summary;  // over included, feasible days
  int infeasible_days = 0;
  int excluded_days = 0;
};

/// Run the tube controller and the offline oracle on every day. Days are
/// independent; with num_threads > 1 they are distributed across workers and
/// merged by day index, so the report does not depend on scheduling.
CampaignReport run_campaign(const std::vector<ScenarioDay>& days, const Plant& plant,
                            const ControllerConfig& cfg, const BnbSettings& settings,
                            double initial_soc, int num_threads = 1);

struct TighteningSweep {
  std::vector<double> rho1;
  std::vector<double> rho2;
  Eigen::MatrixXd ratios;  // rho1 x rho2; NaN marks an infeasible cell
};

TighteningSweep sweep_tightening(const std::vector<double>& rho1_values,
                                 const std::vector<double>& rho2_values,
                                 const ScenarioDay& day, const Plant& plant,
                                 const ControllerConfig& cfg, const BnbSettings& settings,
                                 double initial_soc);

struct HorizonSweepEntry {
  int h2 = 0;
  Summary summary;
  int outliers = 0;
  std::vector<double> ratios;  // included days only, day order
};

/// Oracle costs are computed once per day and shared across horizon values.
std::vector<HorizonSweepEntry> sweep_horizon(const std::vector<int>& h2_values,
                                             const std::vector<ScenarioDay>& days,
                                             const Plant& plant, const ControllerConfig& cfg,
                                             const BnbSettings& settings, double initial_soc,
                                             int num_threads = 1);

/// Days with |opt_cost| below this are excluded from summary statistics.
inline constexpr double kRatioCostFloor = 1.0;

}  // namespace microtube
