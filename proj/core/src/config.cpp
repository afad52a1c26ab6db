#include "microtube/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "microtube/errors.hpp"

namespace microtube {

namespace {

GeneratorParams table_gen_1() {
  GeneratorParams g;
  g.a2 = 0.0013;
  g.a1 = 0.062;
  g.a0 = 0.0;
  g.p_min = 6.0;
  g.p_max = 52.0;
  g.ramp_up = 240.0;
  g.ramp_down = 240.0;
  return g;
}

GeneratorParams table_gen_2() {
  GeneratorParams g;
  g.a2 = 0.0010;
  g.a1 = 0.057;
  g.a0 = 0.0;
  g.p_min = 16.4;
  g.p_max = 92.0;
  g.ramp_up = 280.0;
  g.ramp_down = 280.0;
  return g;
}

struct KeyValue {
  std::string value;
  int line;
  bool consumed = false;
};

class Parser {
public:
  Parser(std::istream& in, std::string origin) : origin_(std::move(origin)) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        fail(lineno, "expected 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty()) fail(lineno, "empty key or value");
      if (entries_.count(key)) fail(lineno, "duplicate key '" + key + "'");
      entries_[key] = {value, lineno, false};
    }
  }

  bool number(const std::string& key, double& out) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return false;
    it->second.consumed = true;
    std::istringstream is(it->second.value);
    double v;
    if (!(is >> v) || !(is >> std::ws).eof()) {
      fail(it->second.line, "key '" + key + "': not a number: '" + it->second.value + "'");
    }
    out = v;
    return true;
  }

  bool integer(const std::string& key, int& out) {
    double v;
    if (!number(key, v)) return false;
    out = static_cast<int>(v);
    if (static_cast<double>(out) != v) {
      fail(entries_[key].line, "key '" + key + "' must be an integer");
    }
    return true;
  }

  bool unsigned64(const std::string& key, std::uint64_t& out) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return false;
    it->second.consumed = true;
    std::istringstream is(it->second.value);
    if (!(is >> out) || !(is >> std::ws).eof()) {
      fail(it->second.line, "key '" + key + "' must be a nonnegative integer");
    }
    return true;
  }

  bool text(const std::string& key, std::string& out) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return false;
    it->second.consumed = true;
    out = it->second.value;
    return true;
  }

  /// Highest generator index mentioned by a genN.* key, or 0.
  int max_gen_index() const {
    int best = 0;
    for (const auto& [key, kv] : entries_) {
      if (key.rfind("gen", 0) != 0) continue;
      const auto dot = key.find('.');
      if (dot == std::string::npos || dot <= 3) continue;
      const std::string idx = key.substr(3, dot - 3);
      if (idx.find_first_not_of("0123456789") != std::string::npos || idx.empty()) continue;
      best = std::max(best, std::stoi(idx));
    }
    return best;
  }

  void reject_unconsumed() const {
    for (const auto& [key, kv] : entries_) {
      if (!kv.consumed) {
        fail(kv.line, "unknown key '" + key + "'");
      }
    }
  }

private:
  static std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    std::ostringstream os;
    os << origin_ << ":" << line << ": " << msg;
    throw ConfigError(os.str());
  }

  std::string origin_;
  std::map<std::string, KeyValue> entries_;
};

}  // namespace

void RunConfig::finalize() {
  plant.grid.tariff = TariffSchedule::peak_offpeak(
      plant.time.slots_per_day, plant.time.slot_hours, tariff.buy_peak, tariff.buy_offpeak,
      tariff.sell_peak, tariff.sell_offpeak, tariff.peak_start_hour, tariff.peak_end_hour);
  plant.validate();
  controller.validate();
  uncertainty.validate();
  if (initial_soc < plant.battery.soc_min || initial_soc > plant.battery.soc_max) {
    throw ConfigError("sim.initial_soc must lie in the battery's static SoC range");
  }
  if (campaign_days < 1 || campaign_days > 365) {
    throw ConfigError("sim.days must lie in [1, 365]");
  }
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.plant.generators = {table_gen_1(), table_gen_2()};
  cfg.finalize();
  return cfg;
}

RunConfig parse_config(std::istream& in, const std::string& origin) {
  Parser p(in, origin);
  RunConfig cfg;
  cfg.plant.generators = {table_gen_1(), table_gen_2()};

  BatteryParams& bat = cfg.plant.battery;
  p.number("battery.capacity_kwh", bat.capacity_kwh);
  p.number("battery.charge_eff", bat.charge_eff);
  p.number("battery.discharge_eff", bat.discharge_eff);
  p.number("battery.soc_min", bat.soc_min);
  p.number("battery.soc_max", bat.soc_max);
  p.number("battery.soc_terminal_lo", bat.soc_terminal_lo);
  p.number("battery.soc_terminal_hi", bat.soc_terminal_hi);
  p.number("battery.charge_max_kw", bat.charge_max_kw);
  p.number("battery.discharge_max_kw", bat.discharge_max_kw);
  p.number("degradation.alpha", bat.degradation.alpha);
  p.number("degradation.beta", bat.degradation.beta);
  p.number("degradation.replacement_cost", bat.degradation.replacement_cost);
  p.integer("degradation.num_segments", bat.degradation.num_segments);

  const int gen_count = std::max(p.max_gen_index(), 2);
  cfg.plant.generators.resize(gen_count);
  for (int j = 0; j < gen_count; ++j) {
    const std::string prefix = "gen" + std::to_string(j + 1) + ".";
    GeneratorParams& g = cfg.plant.generators[j];
    p.number(prefix + "a2", g.a2);
    p.number(prefix + "a1", g.a1);
    p.number(prefix + "a0", g.a0);
    p.number(prefix + "p_min", g.p_min);
    p.number(prefix + "p_max", g.p_max);
    p.number(prefix + "ramp_up", g.ramp_up);
    p.number(prefix + "ramp_down", g.ramp_down);
  }

  p.number("grid.buy_max_kw", cfg.plant.grid.buy_max_kw);
  p.number("grid.sell_max_kw", cfg.plant.grid.sell_max_kw);
  p.number("grid.loss_factor", cfg.plant.grid.loss_factor);

  p.number("tariff.buy_peak", cfg.tariff.buy_peak);
  p.number("tariff.buy_offpeak", cfg.tariff.buy_offpeak);
  p.number("tariff.sell_peak", cfg.tariff.sell_peak);
  p.number("tariff.sell_offpeak", cfg.tariff.sell_offpeak);
  p.number("tariff.peak_start_hour", cfg.tariff.peak_start_hour);
  p.number("tariff.peak_end_hour", cfg.tariff.peak_end_hour);

  p.number("time.slot_hours", cfg.plant.time.slot_hours);
  p.integer("time.slots_per_day", cfg.plant.time.slots_per_day);

  p.number("controller.rho1", cfg.controller.rho1);
  p.number("controller.rho2", cfg.controller.rho2);
  p.number("controller.epsilon", cfg.controller.epsilon);
  p.number("controller.mu_x", cfg.controller.mu_x);
  p.number("controller.mu_u", cfg.controller.mu_u);
  p.integer("controller.h1", cfg.controller.h1_len);
  p.integer("controller.h2", cfg.controller.h2_len);

  p.number("uncertainty.renewable_level", cfg.uncertainty.renewable_level);
  p.number("uncertainty.load_level", cfg.uncertainty.load_level);
  p.unsigned64("uncertainty.seed", cfg.uncertainty.seed);
  std::string model;
  if (p.text("uncertainty.model", model)) {
    if (model == "trunc_normal_ar1") {
      cfg.uncertainty.model = ErrorModel::TruncNormalAr1;
    } else if (model == "uniform") {
      cfg.uncertainty.model = ErrorModel::Uniform;
    } else {
      throw ConfigError(origin + ": uncertainty.model must be 'trunc_normal_ar1' or 'uniform'");
    }
  }

  p.number("sim.initial_soc", cfg.initial_soc);
  p.integer("sim.days", cfg.campaign_days);
  p.number("solver.gap_tol", cfg.solver.gap_tol);
  p.integer("solver.node_limit", cfg.solver.node_limit);
  p.integer("solver.max_iters", cfg.solver.qp.max_iters);

  p.text("run.profiles", cfg.profiles_path);
  p.text("run.out_dir", cfg.out_dir);

  p.reject_unconsumed();
  cfg.finalize();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

void write_config(const RunConfig& cfg, std::ostream& os) {
  os.precision(17);
  os << "battery.capacity_kwh = " << cfg.plant.battery.capacity_kwh << "\n";
  os << "battery.charge_eff = " << cfg.plant.battery.charge_eff << "\n";
  os << "battery.discharge_eff = " << cfg.plant.battery.discharge_eff << "\n";
  os << "battery.soc_min = " << cfg.plant.battery.soc_min << "\n";
  os << "battery.soc_max = " << cfg.plant.battery.soc_max << "\n";
  os << "battery.soc_terminal_lo = " << cfg.plant.battery.soc_terminal_lo << "\n";
  os << "battery.soc_terminal_hi = " << cfg.plant.battery.soc_terminal_hi << "\n";
  os << "battery.charge_max_kw = " << cfg.plant.battery.charge_max_kw << "\n";
  os << "battery.discharge_max_kw = " << cfg.plant.battery.discharge_max_kw << "\n";
  os << "degradation.alpha = " << cfg.plant.battery.degradation.alpha << "\n";
  os << "degradation.beta = " << cfg.plant.battery.degradation.beta << "\n";
  os << "degradation.replacement_cost = " << cfg.plant.battery.degradation.replacement_cost << "\n";
  os << "degradation.num_segments = " << cfg.plant.battery.degradation.num_segments << "\n";
  for (std::size_t j = 0; j < cfg.plant.generators.size(); ++j) {
    const std::string prefix = "gen" + std::to_string(j + 1) + ".";
    const GeneratorParams& g = cfg.plant.generators[j];
    os << prefix << "a2 = " << g.a2 << "\n";
    os << prefix << "a1 = " << g.a1 << "\n";
    os << prefix << "a0 = " << g.a0 << "\n";
    os << prefix << "p_min = " << g.p_min << "\n";
    os << prefix << "p_max = " << g.p_max << "\n";
    os << prefix << "ramp_up = " << g.ramp_up << "\n";
    os << prefix << "ramp_down = " << g.ramp_down << "\n";
  }
  os << "grid.buy_max_kw = " << cfg.plant.grid.buy_max_kw << "\n";
  os << "grid.sell_max_kw = " << cfg.plant.grid.sell_max_kw << "\n";
  os << "grid.loss_factor = " << cfg.plant.grid.loss_factor << "\n";
  os << "tariff.buy_peak = " << cfg.tariff.buy_peak << "\n";
  os << "tariff.buy_offpeak = " << cfg.tariff.buy_offpeak << "\n";
  os << "tariff.sell_peak = " << cfg.tariff.sell_peak << "\n";
  os << "tariff.sell_offpeak = " << cfg.tariff.sell_offpeak << "\n";
  os << "tariff.peak_start_hour = " << cfg.tariff.peak_start_hour << "\n";
  os << "tariff.peak_end_hour = " << cfg.tariff.peak_end_hour << "\n";
  os << "time.slot_hours = " << cfg.plant.time.slot_hours << "\n";
  os << "time.slots_per_day = " << cfg.plant.time.slots_per_day << "\n";
  os << "controller.rho1 = " << cfg.controller.rho1 << "\n";
  os << "controller.rho2 = " << cfg.controller.rho2 << "\n";
  os << "controller.epsilon = " << cfg.controller.epsilon << "\n";
  os << "controller.mu_x = " << cfg.controller.mu_x << "\n";
  os << "controller.mu_u = " << cfg.controller.mu_u << "\n";
  os << "controller.h1 = " << cfg.controller.h1_len << "\n";
  os << "controller.h2 = " << cfg.controller.h2_len << "\n";
  os << "uncertainty.renewable_level = " << cfg.uncertainty.renewable_level << "\n";
  os << "uncertainty.load_level = " << cfg.uncertainty.load_level << "\n";
  os << "uncertainty.seed = " << cfg.uncertainty.seed << "\n";
  os << "uncertainty.model = "
     << (cfg.uncertainty.model == ErrorModel::Uniform ? "uniform" : "trunc_normal_ar1") << "\n";
  os << "sim.initial_soc = " << cfg.initial_soc << "\n";
  os << "sim.days = " << cfg.campaign_days << "\n";
  os << "solver.gap_tol = " << cfg.solver.gap_tol << "\n";
  os << "solver.node_limit = " << cfg.solver.node_limit << "\n";
  os << "solver.max_iters = " << cfg.solver.qp.max_iters << "\n";
  if (!cfg.profiles_path.empty()) os << "run.profiles = " << cfg.profiles_path << "\n";
  os << "run.out_dir = " << cfg.out_dir << "\n";
}

}  // namespace microtube
