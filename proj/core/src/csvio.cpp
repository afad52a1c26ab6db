#include "microtube/csvio.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "microtube/errors.hpp"
#include "microtube/model.hpp"

namespace microtube {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto a = cell.find_first_not_of(" \t\r");
    const auto b = cell.find_last_not_of(" \t\r");
    cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, const std::string& path, int row,
                  const std::string& column) {
  std::istringstream is(cell);
  double v;
  if (!(is >> v) || !(is >> std::ws).eof() || !std::isfinite(v)) {
    std::ostringstream os;
    os << path << ": row " << row << ": column '" << column << "' is not a finite number: '"
       << cell << "'";
    throw DataError(os.str());
  }
  return v;
}

/// Write through a sibling temp file so a crash never leaves a torn file.
void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw DataError("cannot open output file: " + tmp);
    body(os);
    os.flush();
    if (!os) throw DataError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace

std::string fmt_quantity(double v) {
  if (std::abs(v) < 5e-13) v = 0.0;  // avoid "-0"
  char buf[64];
  // 6 significant digits without scientific notation
  int decimals = 5;
  const double mag = std::abs(v);
  if (mag >= 1.0) decimals = std::max(0, 5 - static_cast<int>(std::log10(mag)));
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string fmt_money(double v) {
  if (std::abs(v) < 5e-5) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

ProfileTable load_profiles(const std::string& path, int expected_slots) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open profiles file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const std::vector<std::string> header = split_row(line);

  const std::vector<std::string> full = {"slot", "forecast_load_kw", "actual_load_kw",
                                         "forecast_solar_kw", "actual_solar_kw"};
  const std::vector<std::string> fc_only = {"slot", "forecast_load_kw", "forecast_solar_kw"};

  ProfileTable table;
  if (header == full) {
    table.has_actuals = true;
  } else if (header == fc_only) {
    table.has_actuals = false;
  } else {
    throw DataError(path + ": row 1: unexpected header; expected 'slot,forecast_load_kw" +
                    std::string(",actual_load_kw") + ",forecast_solar_kw,actual_solar_kw'" +
                    " (actual columns may be omitted together)");
  }

  table.forecast.load.resize(expected_slots);
  table.forecast.renewable.resize(expected_slots);
  if (table.has_actuals) {
    table.actual_load.resize(expected_slots);
    table.actual_renewable.resize(expected_slots);
  }

  int row = 1;
  int slot = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (slot >= expected_slots) {
      throw DataError(path + ": row " + std::to_string(row) + ": more than " +
                      std::to_string(expected_slots) + " data rows");
    }
    const std::vector<std::string> cells = split_row(line);
    if (static_cast<int>(cells.size()) != static_cast<int>(header.size())) {
      throw DataError(path + ": row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " columns, found " +
                      std::to_string(cells.size()));
    }
    const double idx = parse_cell(cells[0], path, row, "slot");
    if (idx != slot) {
      throw DataError(path + ": row " + std::to_string(row) + ": expected slot " +
                      std::to_string(slot));
    }
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = parse_cell(cells[c], path, row, header[c]);
      if (v < 0.0) {
        throw DataError(path + ": row " + std::to_string(row) + ": column '" + header[c] +
                        "' must be nonnegative");
      }
      if (header[c] == "forecast_load_kw") table.forecast.load[slot] = v;
      else if (header[c] == "forecast_solar_kw") table.forecast.renewable[slot] = v;
      else if (header[c] == "actual_load_kw") table.actual_load[slot] = v;
      else table.actual_renewable[slot] = v;
    }
    ++slot;
  }
  if (slot != expected_slots) {
    throw DataError(path + ": expected " + std::to_string(expected_slots) +
                    " data rows, found " + std::to_string(slot));
  }
  return table;
}

ScenarioDay to_scenario(const ProfileTable& table, const UncertaintyConfig& ucfg,
                        int day_index) {
  if (table.has_actuals) {
    ScenarioDay day;
    day.forecast_renewable = table.forecast.renewable;
    day.forecast_load = table.forecast.load;
    day.actual_renewable = table.actual_renewable;
    day.actual_load = table.actual_load;
    return day;
  }
  return generate_scenario(table.forecast, ucfg, day_index);
}

void write_profiles(const std::string& path, const ScenarioDay& day) {
  atomic_write(path, [&](std::ostream& os) {
    os << "slot,forecast_load_kw,actual_load_kw,forecast_solar_kw,actual_solar_kw\n";
    for (int t = 0; t < day.forecast_load.size(); ++t) {
      os << t << ',' << fmt_quantity(day.forecast_load[t]) << ','
         << fmt_quantity(day.actual_load[t]) << ',' << fmt_quantity(day.forecast_renewable[t])
         << ',' << fmt_quantity(day.actual_renewable[t]) << '\n';
    }
  });
}

void write_slots_csv(const std::string& path, const DayResult& result,
                     const ScenarioDay& day) {
  atomic_write(path, [&](std::ostream& os) {
    const int num_gen =
        result.records.empty() ? 0 : static_cast<int>(result.records.front().actual.gen.size());
    os << "slot,load_kw,solar_kw";
    for (int j = 0; j < num_gen; ++j) os << ",gen" << (j + 1) << "_kw";
    os << ",buy_kw,sell_kw,charge_kw,discharge_kw,discharging,buying,"
          "nominal_soc,actual_soc,stage_cost,slack_used,nominal_relaxed\n";
    for (const SlotRecord& r : result.records) {
      os << r.slot << ',' << fmt_quantity(day.actual_load[r.slot]) << ','
         << fmt_quantity(day.actual_renewable[r.slot]);
      for (int j = 0; j < num_gen; ++j) os << ',' << fmt_quantity(r.actual.gen[j]);
      os << ',' << fmt_quantity(r.actual.buy) << ',' << fmt_quantity(r.actual.sell) << ','
         << fmt_quantity(r.actual.charge()) << ',' << fmt_quantity(r.actual.discharge()) << ','
         << (r.actual.discharging ? 1 : 0) << ',' << (r.actual.buying ? 1 : 0) << ','
         << fmt_quantity(r.nominal_soc) << ',' << fmt_quantity(r.actual_soc) << ','
         << fmt_money(r.cost) << ',' << (r.slack_used ? 1 : 0) << ','
         << (r.nominal_relaxed ? 1 : 0) << '\n';
    }
  });
}

void write_bounds_csv(const std::string& path, const SocBounds& bounds, double rho1,
                      const BatteryParams& battery) {
  atomic_write(path, [&](std::ostream& os) {
    os << "slot,soc_lo,soc_hi,tight_lo,tight_hi\n";
    for (int t = 0; t < bounds.lo.size(); ++t) {
      const double tlo = std::max(bounds.lo[t], (1.0 + rho1) * battery.soc_min);
      const double thi = std::min(bounds.hi[t], (1.0 - rho1) * battery.soc_max);
      os << t << ',' << fmt_quantity(bounds.lo[t]) << ',' << fmt_quantity(bounds.hi[t]) << ','
         << fmt_quantity(tlo) << ',' << fmt_quantity(thi) << '\n';
    }
  });
}

void write_segments_csv(const std::string& path, const BatteryParams& battery) {
  atomic_write(path, [&](std::ostream& os) {
    const VectorXd costs = segment_costs(battery);
    const int n = battery.degradation.num_segments;
    os << "segment,depth_hi,cost_per_kwh\n";
    for (int i = 0; i < n; ++i) {
      os << (i + 1) << ',' << fmt_quantity(static_cast<double>(i + 1) / n) << ','
         << fmt_money(costs[i]) << '\n';
    }
  });
}

void write_summary_csv(const std::string& path, double alg_cost, double opt_cost) {
  atomic_write(path, [&](std::ostream& os) {
    os << "metric,value\n";
    os << "perfect_dispatch_cost," << fmt_money(opt_cost) << '\n';
    os << "tube_mpc_cost," << fmt_money(alg_cost) << '\n';
    os << "cost_increase," << fmt_money(alg_cost - opt_cost) << '\n';
    if (std::abs(opt_cost) >= kRatioCostFloor) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", alg_cost / opt_cost);
      os << "competitive_ratio," << buf << '\n';
    } else {
      os << "competitive_ratio,nan\n";
    }
  });
}

void write_ratios_csv(const std::string& path, const CampaignReport& report) {
  atomic_write(path, [&](std::ostream& os) {
    os << "day,alg_cost,opt_cost,ratio,feasible,excluded\n";
    for (const DayOutcome& d : report.days) {
      os << d.day << ',' << fmt_money(d.alg_cost) << ',' << fmt_money(d.opt_cost) << ',';
      if (d.excluded || !d.feasible) {
        os << "nan";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", d.ratio);
        os << buf;
      }
      os << ',' << (d.feasible ? 1 : 0) << ',' << (d.excluded ? 1 : 0) << '\n';
    }
  });
}

void write_horizon_csv(const std::string& path,
                       const std::vector<HorizonSweepEntry>& entries) {
  atomic_write(path, [&](std::ostream& os) {
    os << "h2,days,min,q1,median,q3,max,outliers\n";
    for (const HorizonSweepEntry& e : entries) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d", e.h2,
                    e.summary.count, e.summary.min, e.summary.q1, e.summary.median,
                    e.summary.q3, e.summary.max, e.outliers);
      os << buf << '\n';
    }
  });
}

void write_tightening_csv(const std::string& path, const TighteningSweep& sweep) {
  atomic_write(path, [&](std::ostream& os) {
    os << "rho1,rho2,ratio\n";
    for (std::size_t a = 0; a < sweep.rho1.size(); ++a) {
      for (std::size_t b = 0; b < sweep.rho2.size(); ++b) {
        const double r = sweep.ratios(a, b);
        os << fmt_quantity(sweep.rho1[a]) << ',' << fmt_quantity(sweep.rho2[b]) << ',';
        if (std::isnan(r)) {
          os << "nan";
        } else {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.6f", r);
          os << buf;
        }
        os << '\n';
      }
    }
  });
}

}  // namespace microtube
