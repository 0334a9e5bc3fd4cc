#pragma once

// Canned, parameterized experiments and metric extraction.
//
// A scenario is a name plus a flat parameter set with dotted keys
// ("controller.rho", "grid.scr", ...). Presets supply defaults; overrides
// replace them. Runs are fixed-step and deterministic.

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gfm/controller.hpp"
#include "gfm/plant.hpp"

namespace gfm {

/// Ordered key -> value text map with typed accessors.
class ParameterSet {
 public:
  ParameterSet() = default;

  /// Sets a key. When `require_known` is true the key must already exist.
  void set(const std::string& key, const std::string& value, bool require_known = false);
  void set(const std::string& key, double value);
  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

  [[nodiscard]] double number(const std::string& key) const;
  [[nodiscard]] int integer(const std::string& key) const;
  [[nodiscard]] bool flag(const std::string& key) const;
  [[nodiscard]] const std::string& text(const std::string& key) const;

  [[nodiscard]] const std::map<std::string, std::string>& entries() const { return values_; }

  /// Applies "key=value" overrides; keys must exist.
  void apply_overrides(const std::vector<std::string>& assignments);

 private:
  std::map<std::string, std::string> values_;
};

/// Preset names: vsc_208V_2kW, twobus_4160V, hw_186V.
ParameterSet preset_parameters(const std::string& preset);

/// Names of the canned scenarios.
const std::vector<std::string>& scenario_names();

/// Preset defaults plus the scenario's own keys (event times and the like).
/// An empty preset selects the scenario's natural one.
ParameterSet scenario_defaults(const std::string& scenario, const std::string& preset = "");

struct Sample {
  double t = 0.0;
  AlphaBeta i_f;
  AlphaBeta v_f;
  double theta = 0.0;
  double v = 0.0;
  double omega_pu = 0.0;
  double p = 0.0;
  double q = 0.0;
  double p_lp = 0.0;
  double p_star = 0.0;
  bool active = false;
  bool feasible = true;
};

using Series = std::vector<Sample>;

/// A time window of interest, e.g. a fault from inception to clearing.
struct Window {
  std::string name;
  double start = 0.0;
  double end = 0.0;
};

struct Metrics {
  double peak_current = 0.0;
  double steady_current = 0.0;
  double settle_time_current = 0.0;  ///< +inf when the signal never settles
  double settle_time_voltage = 0.0;
  double freq_mean_during_event = 0.0;
  double freq_error_vs_droop = 0.0;
  double limit_violation_integral = 0.0;
  bool lost_sync = false;
};

struct RunResult {
  std::string scenario;
  ParameterSet params;
  std::vector<Series> series;  ///< one per converter, sampled every tau_ctr
  std::vector<Series> full_rate;  ///< optional, every tau_sim
  Window event;                   ///< primary event window
  std::vector<Window> disturbances;
  Metrics metrics;                ///< converter 0
  std::map<std::string, double> extras;
  double wall_seconds = 0.0;
};

struct RunOptions {
  bool log_full = false;
  /// Called before every constraint-aware controller step with the converter
  /// index, the time, the controller and its pre-step state.
  std::function<void(int, double, const ConstraintAwareController&, const ControllerState&,
                     const FilterMeasurement&)>
      observer;
};

/// Runs one scenario. Throws ConfigError, SimulationDiverged, InfeasibleTrip.
RunResult run_scenario(const std::string& scenario, const ParameterSet& params,
                       const RunOptions& options = {});

/// Sentinel returned by settling_time when the signal never settles.
inline constexpr double kNeverSettles = std::numeric_limits<double>::infinity();

/// Centered finite difference of theta divided by omega_0, then a moving
/// average over `window` seconds. Needs at least two samples per window.
std::vector<double> estimate_frequency(const std::vector<double>& theta, double dt, double omega_0,
                                       double window);

/// Time from `t_event` until the signal enters and stays within
/// +/- band * |target| of target up to the end of the series.
double settling_time(const std::vector<double>& t, const std::vector<double>& x, double t_event,
                     double target, double band = 0.05);

struct MetricContext {
  Window event;
  std::vector<Window> disturbances;
  double i_max = 1.2;
  double m_p = 0.03;
  double p_star = 0.0;  ///< active-power setpoint in effect during the event
  double f_base = 60.0;
  double omega_0 = 0.0;
  double tau_ctr = 1e-4;
  double assess_from = 0.0;  ///< lost-sync evaluation starts here
};

Metrics compute_metrics(const Series& s, const MetricContext& ctx);

/// Loss-of-synchronization detector. Frequency criterion: |f - 1| > 0.15 pu
/// for more than 2 cycles. Power criterion: |P_lp - P*| > 0.5 pu for more than
/// 10 cycles, evaluated outside disturbance windows plus a recovery grace.
bool detect_lost_sync(const Series& s, const MetricContext& ctx, double from, double to);

struct RobustnessRow {
  double l_ratio = 1.0;
  double r_ratio = 1.0;
  double peak = 0.0;
  double steady = 0.0;
  bool oscillating = false;
};

/// Ripple threshold of the oscillation test as a fraction of i_max. Twice the
/// 1 % band used for steady current, so a converged limit cycle never trips it.
inline constexpr double kOscillationFraction = 0.02;

/// Oscillation test on |i_f| over the last five cycles of a window: the
/// peak-to-peak ripple exceeds `threshold` pu.
bool oscillation_detected(const Series& s, const Window& w, double f_base, double threshold);

std::vector<RobustnessRow> robustness_sweep(const ParameterSet& base,
                                            const std::vector<double>& l_ratios,
                                            const std::vector<double>& r_ratios);

struct VoltageSupportRow {
  double x_over_r = 0.0;
  std::string controller;
  double current = 0.0;
  double voltage = 0.0;
};

std::vector<VoltageSupportRow> voltage_support_sweep(const ParameterSet& base,
                                                     const std::vector<double>& x_over_r);

struct OverloadResult {
  double max_total_load_mw = 0.0;  ///< resistive plus constant-power load
  std::vector<std::pair<double, bool>> trials;  ///< (constant-power load MW, survived)
};

/// Largest constant-power load (50 kW resolution) that the two-bus system
/// carries without collapse, reported as the total load in MW.
OverloadResult overload_margin(const ParameterSet& base, double resolution_mw = 0.05);

}  // namespace gfm
