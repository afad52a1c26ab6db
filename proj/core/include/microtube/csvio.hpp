#pragma once

// CSV input (forecast/actual day profiles) and output (per-slot dispatch
// logs, bound tables, segment costs, campaign summaries). All writers go
// through a temp file and rename, so readers never see a partial file.

#include <string>

#include "microtube/controller.hpp"
#include "microtube/evaluate.hpp"
#include "microtube/scenario.hpp"

namespace microtube {

/// Day profiles as read from disk. Actual columns are optional; when they
/// are absent, has_actuals is false and the actual vectors are empty.
struct ProfileTable {
  DayProfile forecast;
  bool has_actuals = false;
  Eigen::VectorXd actual_load;
  Eigen::VectorXd actual_renewable;
};

/// Expected header:
///   slot,forecast_load_kw,actual_load_kw,forecast_solar_kw,actual_solar_kw
/// The two actual_* columns may be omitted together. Rows must cover slots
/// 0..expected_slots-1 in order. Errors carry the offending row number.
ProfileTable load_profiles(const std::string& path, int expected_slots);

/// Realize a table into a scenario: use stored actuals when present,
/// otherwise sample them from the uncertainty model.
ScenarioDay to_scenario(const ProfileTable& table, const UncertaintyConfig& ucfg,
                        int day_index = 0);

void write_profiles(const std::string& path, const ScenarioDay& day);

/// Per-slot closed-loop log: realized series, decisions, SoC, stage cost.
void write_slots_csv(const std::string& path, const DayResult& result,
                     const ScenarioDay& day);

/// Per-slot SoC corridor plus the tightened corridor used by the nominal MPC.
void write_bounds_csv(const std::string& path, const SocBounds& bounds, double rho1,
                      const BatteryParams& battery);

/// Segment index, upper depth, marginal cost.
void write_segments_csv(const std::string& path, const BatteryParams& battery);

/// Four-row comparison of the online run against the offline optimum.
void write_summary_csv(const std::string& path, double alg_cost, double opt_cost);

/// One row per campaign day: costs, ratio, feasibility, exclusion.
void write_ratios_csv(const std::string& path, const CampaignReport& report);

void write_horizon_csv(const std::string& path,
                       const std::vector<HorizonSweepEntry>& entries);

void write_tightening_csv(const std::string& path, const TighteningSweep& sweep);

/// Fixed formatting used across writers: 6 significant digits for physical
/// quantities, 4 decimals for currency.
std::string fmt_quantity(double v);
std::string fmt_money(double v);

}  // namespace microtube
