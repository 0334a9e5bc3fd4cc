#include "gfm/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <vector>

#include "gfm/errors.hpp"

namespace gfm {

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_series_csv(std::ostream& out, const Series& series) {
  out << kCsvHeader << "\r\n";
  out << std::setprecision(17);
  for (const auto& s : series) {
    out << s.t << ',' << s.i_f.x << ',' << s.i_f.y << ',' << s.i_f.norm() << ',' << s.v_f.x << ','
        << s.v_f.y << ',' << s.v_f.norm() << ',' << s.theta << ',' << s.v << ',' << s.omega_pu
        << ',' << s.p << ',' << s.q << ',' << (s.active ? 1 : 0) << ',' << (s.feasible ? 1 : 0)
        << "\r\n";
  }
}

Series read_series_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ConfigError("unexpected CSV header");
  Series out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        f.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("non-numeric CSV cell '" + cell + "'");
      }
    }
    if (f.size() != 14) throw ConfigError("CSV row has " + std::to_string(f.size()) + " fields");
    Sample s;
    s.t = f[0];
    s.i_f = {f[1], f[2]};
    s.v_f = {f[4], f[5]};
    s.theta = f[7];
    s.v = f[8];
    s.omega_pu = f[9];
    s.p = f[10];
    s.q = f[11];
    s.active = f[12] != 0.0;
    s.feasible = f[13] != 0.0;
    out.push_back(s);
  }
  return out;
}

nlohmann::json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

nlohmann::json metrics_json(const Metrics& m) {
  return {{"peak_current", json_number(m.peak_current)},
          {"steady_current", json_number(m.steady_current)},
          {"settle_time_current", json_number(m.settle_time_current)},
          {"settle_time_voltage", json_number(m.settle_time_voltage)},
          {"freq_mean_during_event", json_number(m.freq_mean_during_event)},
          {"freq_error_vs_droop", json_number(m.freq_error_vs_droop)},
          {"limit_violation_integral", json_number(m.limit_violation_integral)},
          {"lost_sync", m.lost_sync}};
}

nlohmann::json report_json(const RunResult& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["event"] = {{"name", r.event.name}, {"start", r.event.start}, {"end", r.event.end}};
  j["metrics"] = metrics_json(r.metrics);
  // Flattened too, so consumers can read report["peak_current"] directly.
  for (const auto& [k, v] : j["metrics"].items()) j[k] = v;
  nlohmann::json extras = nlohmann::json::object();
  for (const auto& [k, v] : r.extras) extras[k] = json_number(v);
  j["extras"] = extras;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : r.params.entries()) params[k] = v;
  j["parameters"] = params;
  j["converters"] = r.series.size();
  j["samples"] = r.series.empty() ? 0 : r.series.front().size();
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace gfm
