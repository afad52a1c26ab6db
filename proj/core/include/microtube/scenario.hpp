#pragma once

// Forecast-error scenario generation and the synthetic year of forecast
// profiles used by Monte Carlo campaigns.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "microtube/model.hpp"

namespace microtube {

/// One day of forecast series (no realizations yet).
struct DayProfile {
  Eigen::VectorXd renewable;
  Eigen::VectorXd load;
};

enum class ErrorModel {
  TruncNormalAr1,  // zero-mean truncated normal, sigma = level/2, truncated at
                   // +-level, lag-1 autocorrelation 0.7
  Uniform,         // iid uniform on [-level, +level]
};

struct UncertaintyConfig {
  double renewable_level = 0.20;
  double load_level = 0.10;
  std::uint64_t seed = 1;
  ErrorModel model = ErrorModel::TruncNormalAr1;

  void validate() const;
};

/// Realize a day: actual = forecast * (1 + e_t), clipped at zero. The
/// day_index decorrelates days of a campaign under one seed.
ScenarioDay generate_scenario(const DayProfile& forecast, const UncertaintyConfig& ucfg,
                              int day_index = 0);

/// Per-slot multiplicative error series for one stream (exposed for tests).
Eigen::VectorXd error_series(int num_slots, double level, ErrorModel model,
                             std::uint64_t seed, int day_index, int stream);

/// 365 days of forecast profiles: seasonal solar (summer peak), weekly and
/// seasonal load pattern, smooth low-frequency noise. Deterministic in seed.
std::vector<DayProfile> synth_year(std::uint64_t seed, const TimeGrid& grid);

}  // namespace microtube
