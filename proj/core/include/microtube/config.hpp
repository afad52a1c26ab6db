#pragma once

// Flat key-value run configuration with the case-study defaults baked in.
// Unspecified keys keep their defaults; unknown keys are rejected.

#include <iosfwd>
#include <string>

#include "microtube/bnb.hpp"
#include "microtube/builder.hpp"
#include "microtube/scenario.hpp"

namespace microtube {

/// Scalar tariff description; expanded to per-slot series on finalize.
struct TariffSpec {
  double buy_peak = 0.116;
  double buy_offpeak = 0.072;
  double sell_peak = 0.058;   // half of the buy price
  double sell_offpeak = 0.036;
  double peak_start_hour = 7.0;
  double peak_end_hour = 21.0;
};

struct RunConfig {
  Plant plant;
  TariffSpec tariff;
  ControllerConfig controller;
  UncertaintyConfig uncertainty;
  BnbSettings solver;
  double initial_soc = 0.60;
  int campaign_days = 365;
  std::string profiles_path;
  std::string out_dir = ".";

  /// Rebuild the per-slot tariff series from the spec and validate everything.
  void finalize();
};

/// Defaults only (equivalent to loading an empty file).
RunConfig default_config();

RunConfig load_config(const std::string& path);
RunConfig parse_config(std::istream& in, const std::string& origin);

/// Echo every resolved key; reloading the output reproduces the config.
void write_config(const RunConfig& cfg, std::ostream& os);

}  // namespace microtube
