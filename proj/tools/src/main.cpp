// Command line front end: closed-loop day runs, Monte Carlo campaigns,
// parameter sweeps, and small inspection commands.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "microtube/config.hpp"
#include "microtube/csvio.hpp"
#include "microtube/errors.hpp"
#include "microtube/evaluate.hpp"

namespace {

using namespace microtube;

struct CommonOpts {
  std::string config_path;
  std::string profiles_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> gap_tol;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "Configuration file (key = value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--profiles", o.profiles_path, "Day profiles CSV")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out_dir, "Output directory (created if missing)");
  cmd->add_option("--seed", o.seed, "Override uncertainty.seed");
  cmd->add_option("--gap-tol", o.gap_tol, "Override solver.gap_tol");
  cmd->add_option("--threads", o.threads, "Worker threads for campaigns and sweeps");
}

RunConfig resolve(const CommonOpts& o) {
  RunConfig cfg = o.config_path.empty() ? default_config() : load_config(o.config_path);
  if (!o.profiles_path.empty()) cfg.profiles_path = o.profiles_path;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.seed) cfg.uncertainty.seed = *o.seed;
  if (o.gap_tol) cfg.solver.gap_tol = *o.gap_tol;
  cfg.finalize();
  std::filesystem::create_directories(cfg.out_dir);
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

void echo_config(const RunConfig& cfg) {
  std::ofstream os(out_path(cfg, "config_resolved.txt"));
  write_config(cfg, os);
}

/// Profiles file if given, otherwise one day of the synthetic year.
ScenarioDay pick_day(const RunConfig& cfg, int day_index) {
  if (!cfg.profiles_path.empty()) {
    const ProfileTable table = load_profiles(cfg.profiles_path, cfg.plant.time.slots_per_day);
    return to_scenario(table, cfg.uncertainty, day_index);
  }
  const std::vector<DayProfile> year = synth_year(cfg.uncertainty.seed, cfg.plant.time);
  return generate_scenario(year.at(day_index), cfg.uncertainty, day_index);
}

std::vector<ScenarioDay> pick_days(const RunConfig& cfg, int count) {
  std::vector<ScenarioDay> days;
  if (!cfg.profiles_path.empty()) {
    const ProfileTable table = load_profiles(cfg.profiles_path, cfg.plant.time.slots_per_day);
    for (int d = 0; d < count; ++d) days.push_back(to_scenario(table, cfg.uncertainty, d));
    return days;
  }
  const std::vector<DayProfile> year = synth_year(cfg.uncertainty.seed, cfg.plant.time);
  for (int d = 0; d < count; ++d) {
    days.push_back(generate_scenario(year[d % year.size()], cfg.uncertainty, d));
  }
  return days;
}

void print_summary(const Summary& s) {
  std::cout << "days " << s.count << "  min " << s.min << "  q1 " << s.q1 << "  median "
            << s.median << "  q3 " << s.q3 << "  max " << s.max << "\n";
}

int run_day(const CommonOpts& o, int day_index) {
  const RunConfig cfg = resolve(o);
  echo_config(cfg);
  const ScenarioDay day = pick_day(cfg, day_index);

  TubeController controller(cfg.plant, cfg.controller, cfg.solver);
  const DayResult result = controller.run_day(day, cfg.initial_soc);
  const double opt = perfect_dispatch_cost(day, cfg.plant, cfg.initial_soc, cfg.solver);

  write_slots_csv(out_path(cfg, "slots.csv"), result, day);
  write_summary_csv(out_path(cfg, "summary.csv"), result.daily_cost, opt);
  write_profiles(out_path(cfg, "profiles.csv"), day);

  std::cout << "tube MPC cost      " << fmt_money(result.daily_cost) << "\n";
  std::cout << "perfect dispatch   " << fmt_money(opt) << "\n";
  if (std::abs(opt) >= kRatioCostFloor) {
    std::cout << "competitive ratio  " << competitive_ratio(result.daily_cost, opt) << "\n";
  }
  if (!result.feasible()) {
    std::cout << "failed slots       " << result.failed_slots.size() << "\n";
  }
  return 0;
}

int run_campaign_cmd(const CommonOpts& o, int days_override) {
  const RunConfig cfg = resolve(o);
  echo_config(cfg);
  const int count = days_override > 0 ? days_override : cfg.campaign_days;
  const std::vector<ScenarioDay> days = pick_days(cfg, count);

  const CampaignReport report = run_campaign(days, cfg.plant, cfg.controller, cfg.solver,
                                             cfg.initial_soc, o.threads.value_or(1));
  write_ratios_csv(out_path(cfg, "ratios.csv"), report);

  print_summary(report.summary);
  std::cout << "infeasible " << report.infeasible_days << "  excluded " << report.excluded_days
            << "\n";
  return 0;
}

int sweep_tightening_cmd(const CommonOpts& o, int day_index, std::vector<double> rho1,
                         std::vector<double> rho2) {
  const RunConfig cfg = resolve(o);
  echo_config(cfg);
  if (rho1.empty()) rho1 = {0.0, 0.025, 0.05, 0.075, 0.10};
  if (rho2.empty()) rho2 = {0.0, 0.05, 0.10, 0.15, 0.20};
  const ScenarioDay day = pick_day(cfg, day_index);

  const TighteningSweep sweep =
      sweep_tightening(rho1, rho2, day, cfg.plant, cfg.controller, cfg.solver, cfg.initial_soc);
  write_tightening_csv(out_path(cfg, "tightening.csv"), sweep);
  std::cout << "wrote " << out_path(cfg, "tightening.csv") << "\n";
  return 0;
}

int sweep_horizon_cmd(const CommonOpts& o, std::vector<int> h2, int days) {
  const RunConfig cfg = resolve(o);
  echo_config(cfg);
  if (h2.empty()) h2 = {1, 2, 3, 4};
  const std::vector<ScenarioDay> scenario_days = pick_days(cfg, days);

  const std::vector<HorizonSweepEntry> entries =
      sweep_horizon(h2, scenario_days, cfg.plant, cfg.controller, cfg.solver, cfg.initial_soc,
                    o.threads.value_or(1));
  write_horizon_csv(out_path(cfg, "horizon.csv"), entries);
  for (const HorizonSweepEntry& e : entries) {
    std::cout << "h2=" << e.h2 << "  median " << e.summary.median << "  outliers " << e.outliers
              << "\n";
  }
  return 0;
}

int perfect_dispatch_cmd(const CommonOpts& o, int day_index) {
  const RunConfig cfg = resolve(o);
  const ScenarioDay day = pick_day(cfg, day_index);
  const double opt = perfect_dispatch_cost(day, cfg.plant, cfg.initial_soc, cfg.solver);
  std::cout << fmt_money(opt) << "\n";
  return 0;
}

int show_segments_cmd(const CommonOpts& o) {
  const RunConfig cfg = resolve(o);
  write_segments_csv(out_path(cfg, "segments.csv"), cfg.plant.battery);
  const VectorXd costs = segment_costs(cfg.plant.battery);
  for (int i = 0; i < costs.size(); ++i) {
    std::cout << "segment " << (i + 1) << "  " << fmt_money(costs[i]) << " $/kWh\n";
  }
  return 0;
}

int show_bounds_cmd(const CommonOpts& o) {
  const RunConfig cfg = resolve(o);
  const SocBounds bounds = time_aware_bounds(cfg.plant.battery, cfg.plant.time);
  write_bounds_csv(out_path(cfg, "bounds.csv"), bounds, cfg.controller.rho1, cfg.plant.battery);
  std::cout << "wrote " << out_path(cfg, "bounds.csv") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tube MPC dispatch engine for a battery microgrid"};
  app.require_subcommand(1);

  CommonOpts opts;
  int day_index = 0;
  int days = 0;
  std::vector<double> rho1, rho2;
  std::vector<int> h2;

  CLI::App* c_day = app.add_subcommand("run-day", "Closed-loop run over one day");
  add_common(c_day, opts);
  c_day->add_option("--day", day_index, "Day of year (synthetic profiles only)");

  CLI::App* c_camp = app.add_subcommand("run-campaign", "Monte Carlo campaign over many days");
  add_common(c_camp, opts);
  c_camp->add_option("--days", days, "Number of days (default: sim.days from the config)");

  CLI::App* c_tight = app.add_subcommand("sweep-tightening", "Ratio grid over (rho1, rho2)");
  add_common(c_tight, opts);
  c_tight->add_option("--day", day_index, "Day of year");
  c_tight->add_option("--rho1", rho1, "rho1 grid values");
  c_tight->add_option("--rho2", rho2, "rho2 grid values");

  CLI::App* c_hor = app.add_subcommand("sweep-horizon", "Ratio statistics per ancillary horizon");
  add_common(c_hor, opts);
  c_hor->add_option("--h2", h2, "Ancillary horizon lengths");
  c_hor->add_option("--days", days, "Number of days")->default_val(30);

  CLI::App* c_perf = app.add_subcommand("perfect-dispatch", "Offline optimum for one day");
  add_common(c_perf, opts);
  c_perf->add_option("--day", day_index, "Day of year");

  CLI::App* c_seg = app.add_subcommand("show-segments", "Segment degradation cost table");
  add_common(c_seg, opts);

  CLI::App* c_bnd = app.add_subcommand("show-bounds", "Time-aware SoC bound table");
  add_common(c_bnd, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_day->parsed()) return run_day(opts, day_index);
    if (c_camp->parsed()) return run_campaign_cmd(opts, days);
    if (c_tight->parsed()) return sweep_tightening_cmd(opts, day_index, rho1, rho2);
    if (c_hor->parsed()) return sweep_horizon_cmd(opts, h2, days);
    if (c_perf->parsed()) return perfect_dispatch_cmd(opts, day_index);
    if (c_seg->parsed()) return show_segments_cmd(opts);
    if (c_bnd->parsed()) return show_bounds_cmd(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 4;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
