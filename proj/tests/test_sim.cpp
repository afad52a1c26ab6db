#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "microtube/config.hpp"
#include "microtube/evaluate.hpp"
#include "microtube/scenario.hpp"

using namespace microtube;

TEST_CASE("competitive ratio arithmetic") {
  CHECK(std::abs(competitive_ratio(574.39, 554.25) - 1.0363) < 5e-5);
  CHECK(std::abs(competitive_ratio(293.87, 277.55) - 1.0588) < 5e-5);
  CHECK(competitive_ratio(100.0, 100.0) == 1.0);
  CHECK_THROWS_AS(competitive_ratio(10.0, 0.0), DomainError);
  CHECK_THROWS_AS(competitive_ratio(10.0, -5.0), DomainError);
}

TEST_CASE("summary statistics") {
  const Summary s = summarize({5.0, 1.0, 3.0, 2.0, 4.0});
  CHECK(s.count == 5);
  CHECK(s.min == 1.0);
  CHECK(s.max == 5.0);
  CHECK(s.median == 3.0);
  CHECK(s.q1 == 2.0);
  CHECK(s.q3 == 4.0);

  CHECK(count_outliers({1.0, 2.0, 3.0, 4.0, 100.0}) == 1);
  CHECK(count_outliers({1.0, 2.0, 3.0, 4.0}) == 0);
}

TEST_CASE("scenario generation") {
  const RunConfig cfg = default_config();
  const DayProfile profile = synth_year(11, cfg.plant.time)[60];

  SUBCASE("zero levels reproduce the forecast") {
    UncertaintyConfig u = cfg.uncertainty;
    u.renewable_level = 0.0;
    u.load_level = 0.0;
    const ScenarioDay day = generate_scenario(profile, u, 60);
    CHECK((day.actual_load - day.forecast_load).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((day.actual_renewable - day.forecast_renewable).lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("same seed, same realization") {
    const ScenarioDay a = generate_scenario(profile, cfg.uncertainty, 60);
    const ScenarioDay b = generate_scenario(profile, cfg.uncertainty, 60);
    CHECK((a.actual_load - b.actual_load).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((a.actual_renewable - b.actual_renewable).lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("different days decorrelate under one seed") {
    const ScenarioDay a = generate_scenario(profile, cfg.uncertainty, 60);
    const ScenarioDay b = generate_scenario(profile, cfg.uncertainty, 61);
    CHECK((a.actual_load - b.actual_load).lpNorm<Eigen::Infinity>() > 0.0);
  }
  SUBCASE("zero forecast stays zero") {
    DayProfile flat = profile;
    flat.renewable.setZero();
    const ScenarioDay day = generate_scenario(flat, cfg.uncertainty, 60);
    CHECK(day.actual_renewable.lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("actuals never go negative") {
    UncertaintyConfig u = cfg.uncertainty;
    u.renewable_level = 0.9;
    u.load_level = 0.9;
    for (int d = 0; d < 20; ++d) {
      const ScenarioDay day = generate_scenario(profile, u, d);
      CHECK(day.actual_load.minCoeff() >= 0.0);
      CHECK(day.actual_renewable.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("error series respect the truncation level") {
  for (const ErrorModel model : {ErrorModel::TruncNormalAr1, ErrorModel::Uniform}) {
    for (int d = 0; d < 100; ++d) {
      const Eigen::VectorXd e = error_series(96, 0.2, model, 17, d, 0);
      REQUIRE(e.size() == 96);
      CHECK(e.lpNorm<Eigen::Infinity>() <= 0.2 + 1e-12);
    }
  }
}

TEST_CASE("synthetic year shape") {
  const TimeGrid grid;
  const auto year = synth_year(42, grid);
  REQUIRE(year.size() == 365);
  for (const DayProfile& d : year) {
    REQUIRE(d.renewable.size() == 96);
    REQUIRE(d.load.size() == 96);
    CHECK(d.renewable.minCoeff() >= 0.0);
    CHECK(d.load.minCoeff() >= 0.0);
  }
  const auto again = synth_year(42, grid);
  for (int i = 0; i < 365; ++i) {
    CHECK((year[i].renewable - again[i].renewable).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((year[i].load - again[i].load).lpNorm<Eigen::Infinity>() == 0.0);
  }
  // summer solar energy beats winter solar energy
  double summer = 0.0, winter = 0.0;
  for (int i = 160; i < 190; ++i) summer += year[i].renewable.sum();
  for (int i = 0; i < 30; ++i) winter += year[i].renewable.sum();
  CHECK(summer > winter);
}

TEST_CASE("campaign on a pair of days") {
  const RunConfig cfg = default_config();
  const auto year = synth_year(cfg.uncertainty.seed, cfg.plant.time);
  std::vector<ScenarioDay> days;
  days.push_back(generate_scenario(year[140], cfg.uncertainty, 140));
  days.push_back(generate_scenario(year[141], cfg.uncertainty, 141));

  const CampaignReport rep =
      run_campaign(days, cfg.plant, cfg.controller, cfg.solver, cfg.initial_soc);
  REQUIRE(rep.days.size() == 2);
  for (const DayOutcome& d : rep.days) {
    REQUIRE(d.feasible);
    // the offline optimum over actuals is a lower bound on the realized cost
    CHECK(d.opt_cost <= d.alg_cost + 1e-6);
    if (!d.excluded) CHECK(d.ratio >= 1.0 - 1e-9);
  }

  SUBCASE("rerun is identical") {
    const CampaignReport rep2 =
        run_campaign(days, cfg.plant, cfg.controller, cfg.solver, cfg.initial_soc);
    for (std::size_t i = 0; i < rep.days.size(); ++i) {
      CHECK(rep.days[i].alg_cost == rep2.days[i].alg_cost);
      CHECK(rep.days[i].opt_cost == rep2.days[i].opt_cost);
    }
  }
  SUBCASE("single-day campaign reduces to that day's ratio") {
    const std::vector<ScenarioDay> one(days.begin(), days.begin() + 1);
    const CampaignReport rep1 =
        run_campaign(one, cfg.plant, cfg.controller, cfg.solver, cfg.initial_soc);
    REQUIRE(rep1.days.size() == 1);
    CHECK(rep1.summary.count == (rep1.days[0].excluded ? 0 : 1));
    if (!rep1.days[0].excluded) {
      CHECK(rep1.summary.median == rep1.days[0].ratio);
      CHECK(rep1.days[0].ratio == rep.days[0].ratio);
    }
  }
  SUBCASE("day order does not change per-day results") {
    std::vector<ScenarioDay> swapped = {days[1], days[0]};
    const CampaignReport rep3 =
        run_campaign(swapped, cfg.plant, cfg.controller, cfg.solver, cfg.initial_soc);
    CHECK(rep3.days[0].alg_cost == rep.days[1].alg_cost);
    CHECK(rep3.days[1].alg_cost == rep.days[0].alg_cost);
  }
}
