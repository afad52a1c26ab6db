#include "microtube/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "microtube/errors.hpp"

namespace microtube {

double competitive_ratio(double alg_cost, double opt_cost) {
  if (opt_cost <= 0.0) {
    throw DomainError("competitive ratio undefined for non-positive oracle cost");
  }
  return alg_cost / opt_cost;
}

double perfect_dispatch_cost(const ScenarioDay& day, const Plant& plant,
                             double initial_soc, const BnbSettings& settings,
                             QpSolver* solver) {
  const MiqpProblem p =
      build_perfect_dispatch(day, plant, split_soc(initial_soc, plant.num_segments()));
  BnbReport report = solve_miqp(p, settings, solver);
  if (report.status == SolveStatus::Infeasible) {
    throw InfeasibleError("perfect dispatch problem is infeasible for this day");
  }
  return report.incumbent.objective;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * (values.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= values.size()) return values.back();
    return values[i] * (1.0 - frac) + values[i + 1] * frac;
  };
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  return s;
}

int count_outliers(const std::vector<double>& values) {
  if (values.size() < 4) return 0;
  const Summary s = summarize(values);
  const double iqr = s.q3 - s.q1;
  const double lo = s.q1 - 1.5 * iqr;
  const double hi = s.q3 + 1.5 * iqr;
  int n = 0;
  for (double v : values) {
    if (v < lo || v > hi) ++n;
  }
  return n;
}

namespace {

DayOutcome evaluate_day(int index, const ScenarioDay& day, const Plant& plant,
                        const ControllerConfig& cfg, const BnbSettings& settings,
                        double initial_soc, TubeController& controller,
                        QpSolver* oracle_solver, const double* oracle_cost_hint) {
  (void)cfg;
  DayOutcome out;
  out.day = index;
  try {
    const DayResult result = controller.run_day(day, initial_soc);
    out.alg_cost = result.daily_cost;
    out.feasible = result.feasible();
    out.opt_cost = oracle_cost_hint
                       ? *oracle_cost_hint
                       : perfect_dispatch_cost(day, plant, initial_soc, settings, oracle_solver);
    if (std::abs(out.opt_cost) < kRatioCostFloor) {
      out.excluded = true;
    } else {
      out.ratio = competitive_ratio(out.alg_cost, out.opt_cost);
    }
  } catch (const std::exception&) {
    out.feasible = false;
    out.excluded = true;
  }
  return out;
}

void assemble(CampaignReport& report) {
  std::vector<double> ratios;
  for (const DayOutcome& d : report.days) {
    if (!d.feasible) ++report.infeasible_days;
    if (d.excluded) {
      ++report.excluded_days;
      continue;
    }
    if (d.feasible) ratios.push_back(d.ratio);
  }
  report.summary = summarize(std::move(ratios));
}

}  // namespace

CampaignReport run_campaign(const std::vector<ScenarioDay>& days, const Plant& plant,
                            const ControllerConfig& cfg, const BnbSettings& settings,
                            double initial_soc, int num_threads) {
  CampaignReport report;
  report.days.resize(days.size());

  const int workers = std::max(1, num_threads);
  if (workers == 1) {
    TubeController controller(plant, cfg, settings);
    QpSolver oracle(settings.qp);
    for (std::size_t i = 0; i < days.size(); ++i) {
      report.days[i] = evaluate_day(static_cast<int>(i), days[i], plant, cfg, settings,
                                    initial_soc, controller, &oracle, nullptr);
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
      TubeController controller(plant, cfg, settings);
      QpSolver oracle(settings.qp);
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= days.size()) break;
        report.days[i] = evaluate_day(static_cast<int>(i), days[i], plant, cfg, settings,
                                      initial_soc, controller, &oracle, nullptr);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  assemble(report);
  return report;
}

TighteningSweep sweep_tightening(const std::vector<double>& rho1_values,
                                 const std::vector<double>& rho2_values,
                                 const ScenarioDay& day, const Plant& plant,
                                 const ControllerConfig& cfg, const BnbSettings& settings,
                                 double initial_soc) {
  TighteningSweep sweep;
  sweep.rho1 = rho1_values;
  sweep.rho2 = rho2_values;
  sweep.ratios.resize(rho1_values.size(), rho2_values.size());

  QpSolver oracle(settings.qp);
  const double opt = perfect_dispatch_cost(day, plant, initial_soc, settings, &oracle);

  for (std::size_t a = 0; a < rho1_values.size(); ++a) {
    for (std::size_t b = 0; b < rho2_values.size(); ++b) {
      ControllerConfig c = cfg;
      c.rho1 = rho1_values[a];
      c.rho2 = rho2_values[b];
      try {
        TubeController controller(plant, c, settings);
        const DayResult r = controller.run_day(day, initial_soc);
        if (!r.feasible() || std::abs(opt) < kRatioCostFloor) {
          sweep.ratios(a, b) = std::nan("");
        } else {
          sweep.ratios(a, b) = competitive_ratio(r.daily_cost, opt);
        }
      } catch (const std::exception&) {
        sweep.ratios(a, b) = std::nan("");
      }
    }
  }
  return sweep;
}

std::vector<HorizonSweepEntry> sweep_horizon(const std::vector<int>& h2_values,
                                             const std::vector<ScenarioDay>& days,
                                             const Plant& plant, const ControllerConfig& cfg,
                                             const BnbSettings& settings, double initial_soc,
                                             int num_threads) {
  // Oracle costs do not depend on the controller horizon.
  std::vector<double> oracle_costs(days.size());
  {
    QpSolver oracle(settings.qp);
    for (std::size_t i = 0; i < days.size(); ++i) {
      oracle_costs[i] = perfect_dispatch_cost(days[i], plant, initial_soc, settings, &oracle);
    }
  }

  std::vector<HorizonSweepEntry> entries;
  for (int h2 : h2_values) {
    ControllerConfig c = cfg;
    c.h2_len = h2;
    if (c.h2_len > c.h1_len) {
      throw ConfigError("sweep_horizon: h2 exceeds h1");
    }

    HorizonSweepEntry entry;
    entry.h2 = h2;
    std::vector<DayOutcome> outcomes(days.size());

    const int workers = std::max(1, num_threads);
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
      TubeController controller(plant, c, settings);
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= days.size()) break;
        outcomes[i] = evaluate_day(static_cast<int>(i), days[i], plant, c, settings,
                                   initial_soc, controller, nullptr, &oracle_costs[i]);
      }
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }

    for (const DayOutcome& d : outcomes) {
      if (d.feasible && !d.excluded) entry.ratios.push_back(d.ratio);
    }
    entry.summary = summarize(entry.ratios);
    entry.outliers = count_outliers(entry.ratios);
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace microtube
