#include "microtube/scenario.hpp"

#include <cmath>
#include <random>

#include "microtube/errors.hpp"

namespace microtube {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

void UncertaintyConfig::validate() const {
  if (renewable_level < 0.0 || load_level < 0.0) {
    throw ConfigError("uncertainty levels must be >= 0");
  }
}

Eigen::VectorXd error_series(int num_slots, double level, ErrorModel model,
                             std::uint64_t seed, int day_index, int stream) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(num_slots);
  if (level <= 0.0) return e;

  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(day_index), stream));
  if (model == ErrorModel::Uniform) {
    std::uniform_real_distribution<double> dist(-level, level);
    for (int t = 0; t < num_slots; ++t) e[t] = dist(rng);
    return e;
  }

  // AR(1) with stationary sigma = level/2, truncated at the stated level so
  // that `level` is the worst case.
  const double phi = 0.7;
  const double sigma = level / 2.0;
  const double innov = sigma * std::sqrt(1.0 - phi * phi);
  std::normal_distribution<double> normal(0.0, 1.0);
  double prev = std::clamp(sigma * normal(rng), -level, level);
  e[0] = prev;
  for (int t = 1; t < num_slots; ++t) {
    prev = std::clamp(phi * prev + innov * normal(rng), -level, level);
    e[t] = prev;
  }
  return e;
}

ScenarioDay generate_scenario(const DayProfile& forecast, const UncertaintyConfig& ucfg,
                              int day_index) {
  ucfg.validate();
  const int T = static_cast<int>(forecast.renewable.size());
  if (forecast.load.size() != T) throw DataError("forecast series lengths disagree");
  if ((forecast.renewable.array() < 0.0).any() || (forecast.load.array() < 0.0).any()) {
    throw DataError("forecasts must be nonnegative");
  }

  const Eigen::VectorXd er =
      error_series(T, ucfg.renewable_level, ucfg.model, ucfg.seed, day_index, 0);
  const Eigen::VectorXd el =
      error_series(T, ucfg.load_level, ucfg.model, ucfg.seed, day_index, 1);

  ScenarioDay day;
  day.forecast_renewable = forecast.renewable;
  day.forecast_load = forecast.load;
  day.actual_renewable =
      (forecast.renewable.array() * (1.0 + er.array())).cwiseMax(0.0).matrix();
  day.actual_load = (forecast.load.array() * (1.0 + el.array())).cwiseMax(0.0).matrix();
  return day;
}

std::vector<DayProfile> synth_year(std::uint64_t seed, const TimeGrid& grid) {
  const int T = grid.slots_per_day;
  const double tau = grid.slot_hours;
  std::vector<DayProfile> year;
  year.reserve(365);

  constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

  for (int d = 0; d < 365; ++d) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(d), 7));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double season = std::cos(kTwoPi * (d - 172) / 365.0);  // 1 at summer solstice

    // solar: seasonal amplitude 100..350 kW, seasonal daylight window
    const double solar_peak = 225.0 + 125.0 * season;
    const double sunrise = 6.5 - 1.5 * season;
    const double sunset = 17.5 + 1.5 * season;
    const double solar_day_factor = 0.80 + 0.35 * unit(rng);  // day-to-day weather

    // load: ~190 kW base, summer-heavy, weekends lighter
    const double load_base = 190.0 * (1.0 + 0.15 * 0.5 * (1.0 + std::cos(kTwoPi * (d - 190) / 365.0)));
    const double weekend = (d % 7 == 5 || d % 7 == 6) ? 0.85 : 1.0;
    const double load_day_factor = 0.95 + 0.10 * unit(rng);

    // smooth low-frequency intra-day noise
    double amp_s[3], ph_s[3], amp_l[3], ph_l[3];
    for (int h = 0; h < 3; ++h) {
      amp_s[h] = 0.05 * unit(rng);
      ph_s[h] = kTwoPi * unit(rng);
      amp_l[h] = 0.04 * unit(rng);
      ph_l[h] = kTwoPi * unit(rng);
    }

    DayProfile day;
    day.renewable.resize(T);
    day.load.resize(T);
    for (int t = 0; t < T; ++t) {
      const double hour = (t + 0.5) * tau;

      double solar = 0.0;
      if (hour > sunrise && hour < sunset) {
        const double x = (hour - sunrise) / (sunset - sunrise);
        solar = solar_peak * solar_day_factor * std::pow(std::sin(3.14159265358979323846 * x), 2.0);
      }
      double wiggle_s = 1.0, wiggle_l = 1.0;
      for (int h = 0; h < 3; ++h) {
        wiggle_s += amp_s[h] * std::sin(kTwoPi * (h + 1) * hour / 24.0 + ph_s[h]);
        wiggle_l += amp_l[h] * std::sin(kTwoPi * (h + 1) * hour / 24.0 + ph_l[h]);
      }
      day.renewable[t] = std::max(0.0, solar * wiggle_s);

      const double shape = 0.75 + 0.35 * std::exp(-(hour - 9.5) * (hour - 9.5) / 8.0) +
                           0.55 * std::exp(-(hour - 19.0) * (hour - 19.0) / 10.0);
      day.load[t] = std::max(0.0, load_base * weekend * load_day_factor * shape * wiggle_l);
    }
    year.push_back(std::move(day));
  }
  return year;
}

}  // namespace microtube
