#pragma once

// CSV time series and JSON run reports.

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "gfm/scenarios.hpp"

namespace gfm {

/// Header of the per-sample CSV, one row per controller sample.
inline constexpr const char* kCsvHeader =
    "t,i_f_alpha,i_f_beta,i_f_mag,v_f_alpha,v_f_beta,v_f_mag,theta,V,omega_pu,P_pu,Q_pu,"
    "limiter_active,feasible";

void write_series_csv(std::ostream& out, const Series& series);

/// Reads what write_series_csv wrote. Columns absent from the CSV (filtered
/// power, setpoint) are left at zero. Throws ConfigError on malformed input.
Series read_series_csv(std::istream& in);

/// Quotes a CSV field when it contains a comma, quote or line break.
std::string csv_field(const std::string& text);

/// Finite numbers stay numbers; infinities and NaN become sentinel strings.
nlohmann::json json_number(double v);

nlohmann::json metrics_json(const Metrics& m);

/// Scenario, metrics, extras and the fully resolved parameter set.
nlohmann::json report_json(const RunResult& r);

}  // namespace gfm
