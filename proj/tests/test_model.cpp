#include <cmath>
#include <random>

#include "doctest.h"
#include "microtube/config.hpp"
#include "microtube/model.hpp"

using namespace microtube;

namespace {

BatteryParams default_battery() { return BatteryParams{}; }

// Independent long-double evaluation of the loss curve and segment costs.
long double phi_oracle(long double depth, long double alpha, long double beta) {
  return alpha * powl(depth, 1.0L + beta);
}

long double segment_cost_oracle(int i, const BatteryParams& b) {
  const auto& d = b.degradation;
  const long double n = d.num_segments;
  const long double dphi = phi_oracle(i / n, d.alpha, d.beta) -
                           phi_oracle((i - 1) / n, d.alpha, d.beta);
  return d.replacement_cost / (b.discharge_eff * b.capacity_kwh) * n * dphi;
}

}  // namespace

TEST_CASE("cycle life loss curve") {
  DegradationParams d;
  CHECK(cycle_life_loss(0.0, d) == 0.0);
  CHECK(cycle_life_loss(1.0, d) == doctest::Approx(5.24e-4).epsilon(1e-12));
  const double half = cycle_life_loss(0.5, d);
  CHECK(std::abs(half - static_cast<double>(phi_oracle(0.5L, 5.24e-4L, 1.03L))) < 1e-15);
  CHECK(std::abs(half - 1.2831e-4) < 1e-8);
}

TEST_CASE("segment costs match high-precision evaluation") {
  const BatteryParams b = default_battery();
  CHECK(std::abs(segment_cost(1, b) - 0.010295) < 1e-5);
  CHECK(std::abs(segment_cost(10, b) - 0.21242) < 1e-4);
  const VectorXd c = segment_costs(b);
  REQUIRE(c.size() == 10);
  for (int i = 0; i < c.size(); ++i) {
    CHECK(c[i] ==
          doctest::Approx(static_cast<double>(segment_cost_oracle(i + 1, b))).epsilon(1e-12));
  }
}

TEST_CASE("segment costs strictly increase with depth") {
  const VectorXd c = segment_costs(default_battery());
  for (int i = 0; i + 1 < c.size(); ++i) CHECK(c[i] < c[i + 1]);
}

TEST_CASE("linear loss curve gives uniform segment costs") {
  BatteryParams b = default_battery();
  b.degradation.beta = 0.0;
  const VectorXd c = segment_costs(b);
  const double expect = 80000.0 * 5.24e-4 / (0.95 * 400.0);
  for (int i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("segment costs telescope to full-depth replacement loss") {
  const BatteryParams b = default_battery();
  const VectorXd c = segment_costs(b);
  const double seg_kwh = b.capacity_kwh / c.size();
  const double total = c.sum() * seg_kwh * b.discharge_eff;
  const double full = b.degradation.replacement_cost * cycle_life_loss(1.0, b.degradation);
  CHECK(std::abs(total - full) <= 1e-6 * full);
}

TEST_CASE("soc_step applies charge and discharge gains") {
  const BatteryParams b = default_battery();
  const TimeGrid grid;
  const BatteryState s0 = split_soc(0.5, 10);

  SUBCASE("no power, no change") {
    const DispatchDecision d = DispatchDecision::zeros(2, 10);
    CHECK(soc_step(s0, d, b, grid).soc() == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("80 kW charge for one slot") {
    DispatchDecision d = DispatchDecision::zeros(2, 10);
    d.seg_charge[5] = 80.0;
    CHECK(soc_step(s0, d, b, grid).soc() - 0.5 == doctest::Approx(0.0475).epsilon(1e-12));
  }
  SUBCASE("80 kW discharge for one slot") {
    DispatchDecision d = DispatchDecision::zeros(2, 10);
    d.seg_discharge[4] = 80.0;
    d.discharging = true;
    CHECK(std::abs(soc_step(s0, d, b, grid).soc() - 0.5 + 0.0526316) < 1e-7);
  }
  SUBCASE("segment overflow is rejected") {
    DispatchDecision d = DispatchDecision::zeros(2, 10);
    d.seg_charge[0] = 80.0;  // segment 1 is already full at 0.1
    CHECK_THROWS_AS(soc_step(s0, d, b, grid), ConstraintViolation);
  }
}

TEST_CASE("round-trip energy shrinks by the combined efficiency") {
  const BatteryParams b = default_battery();
  const TimeGrid grid;
  const BatteryState s0 = split_soc(0.5, 10);

  DispatchDecision charge = DispatchDecision::zeros(2, 10);
  charge.seg_charge[5] = 80.0;
  const BatteryState s1 = soc_step(s0, charge, b, grid);

  // Discharging eta_c * eta_d of the charged power returns the SoC exactly.
  DispatchDecision discharge = DispatchDecision::zeros(2, 10);
  discharge.seg_discharge[5] = b.charge_eff * b.discharge_eff * 80.0;
  discharge.discharging = true;
  const BatteryState s2 = soc_step(s1, discharge, b, grid);
  CHECK(std::abs(s2.soc() - s0.soc()) < 1e-9);
}

TEST_CASE("aggregate soc_step matches the aggregate recursion") {
  const BatteryParams b = default_battery();
  const TimeGrid grid;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> power(0.0, 8.0);
  BatteryState s = split_soc(0.55, 10);
  for (int trial = 0; trial < 200; ++trial) {
    DispatchDecision d = DispatchDecision::zeros(2, 10);
    for (int i = 0; i < 10; ++i) {
      if (rng() & 1u) {
        d.seg_charge[i] = std::min(power(rng), (0.1 - s.segments[i]) / (0.95 * 0.25 / 400.0));
      } else {
        d.seg_discharge[i] = std::min(power(rng), s.segments[i] * (0.95 * 400.0 / 0.25));
      }
    }
    const BatteryState next = soc_step(s, d, b, grid);
    const double expect = s.soc() + 0.95 * d.charge() * 0.25 / 400.0 -
                          d.discharge() * 0.25 / (0.95 * 400.0);
    CHECK(std::abs(next.soc() - expect) < 1e-9);
    s = next;
  }
}

TEST_CASE("time-aware SoC bounds") {
  const BatteryParams b = default_battery();
  const TimeGrid grid;
  const SocBounds bounds = time_aware_bounds(b, grid);
  REQUIRE(bounds.lo.size() == 96);

  SUBCASE("terminal band at the last slot") {
    CHECK(bounds.lo[95] == 0.50);
    CHECK(bounds.hi[95] == 0.60);
  }
  SUBCASE("one backward step") {
    CHECK(bounds.lo[94] == doctest::Approx(0.4525).epsilon(1e-9));
    CHECK(std::abs(bounds.hi[94] - 0.6526316) < 1e-7);
  }
  SUBCASE("width half of the static range two slots before the terminal band") {
    CHECK(std::abs((bounds.hi[93] - bounds.lo[93]) - 0.3003) < 1e-4);
  }
  SUBCASE("saturates to the static bounds 14+ slots before day end") {
    for (int t = 0; t <= 95 - 14; ++t) {
      CHECK(bounds.lo[t] == 0.20);
      CHECK(bounds.hi[t] == 0.90);
    }
  }
  SUBCASE("bounds funnel monotonically into the terminal band") {
    for (int t = 0; t + 1 < 96; ++t) {
      CHECK(bounds.lo[t] <= bounds.lo[t + 1] + 1e-12);
      CHECK(bounds.hi[t] >= bounds.hi[t + 1] - 1e-12);
    }
  }
}

TEST_CASE("time-aware bounds reject an unreachable terminal band") {
  // a slow battery cannot climb from the static ceiling into a high terminal band
  BatteryParams b = default_battery();
  b.charge_max_kw = 1e-6;
  b.discharge_max_kw = 1e-6;
  b.soc_max = 0.60;
  b.soc_terminal_lo = 0.89;
  b.soc_terminal_hi = 0.90;
  TimeGrid grid;
  CHECK_THROWS_AS(time_aware_bounds(b, grid), InfeasibleError);
}

TEST_CASE("stage cost") {
  const RunConfig cfg = default_config();
  const Plant& plant = cfg.plant;

  SUBCASE("all-zero decision costs nothing") {
    const DispatchDecision d = DispatchDecision::zeros(2, 10);
    CHECK(stage_cost(d, plant.generators, plant.grid, plant.battery, plant.time, 40, 0.0) ==
          0.0);
  }
  SUBCASE("generator 1 at full output") {
    DispatchDecision d = DispatchDecision::zeros(2, 10);
    d.gen[0] = 52.0;
    const double cost =
        stage_cost(d, plant.generators, plant.grid, plant.battery, plant.time, 40, 0.0);
    CHECK(std::abs(cost - 1.68482) < 1e-4);
  }
  SUBCASE("buying 100 kW at the peak price") {
    DispatchDecision d = DispatchDecision::zeros(2, 10);
    d.buy = 100.0;
    d.buying = true;
    const double cost =
        stage_cost(d, plant.generators, plant.grid, plant.battery, plant.time, 40, 0.0);
    CHECK(cost == doctest::Approx(2.90).epsilon(1e-12));
  }
  SUBCASE("selling earns the sell price") {
    DispatchDecision d = DispatchDecision::zeros(2, 10);
    d.sell = 100.0;
    const double cost =
        stage_cost(d, plant.generators, plant.grid, plant.battery, plant.time, 40, 0.0);
    CHECK(cost == doctest::Approx(-0.058 * 100.0 * 0.25).epsilon(1e-12));
  }
}

TEST_CASE("split_soc fills segments in order") {
  const BatteryState s = split_soc(0.37, 10);
  CHECK(s.soc() == doctest::Approx(0.37).epsilon(1e-15));
  CHECK(s.segments[0] == doctest::Approx(0.1));
  CHECK(s.segments[1] == doctest::Approx(0.1));
  CHECK(s.segments[2] == doctest::Approx(0.1));
  CHECK(s.segments[3] == doctest::Approx(0.07));
  for (int i = 4; i < 10; ++i) CHECK(s.segments[i] == 0.0);
  CHECK_THROWS_AS(split_soc(1.5, 10), DomainError);
  CHECK_THROWS_AS(split_soc(-0.1, 10), DomainError);
}
