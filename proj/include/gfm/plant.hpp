#pragma once

// Averaged-model converter plant: LCL-filtered converters on a linear network,
// a Thevenin grid source, breakers, faults, loads and timed events.
//
// Per-unit convention: voltages and currents are peak phase values divided by
// V_base,peak = V_ll,rms sqrt(2/3) and I_base,peak = 2 S_base / (3 V_base,peak),
// so that per-unit power is v'i. Impedances are on Z_base = V_ll^2 / S_base.
// Time stays in seconds; an inductance x_pu at base frequency becomes
// x_pu / omega_base.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gfm/frames.hpp"
#include "gfm/network.hpp"

namespace gfm {

struct BaseValues {
  double v_ll_rms = 0.0;  ///< line-to-line rms voltage [V]
  double s_base = 0.0;    ///< three-phase power [VA]
  double f_base = 60.0;   ///< [Hz]

  [[nodiscard]] double omega_base() const;
  [[nodiscard]] double v_peak() const;
  [[nodiscard]] double i_peak() const;
  [[nodiscard]] double z_base() const;
};

struct GridImpedance {
  double x_pu = 0.0;
  double r_pu = 0.0;
  double inductance_pu = 0.0;  ///< x_pu / omega_base, for the per-unit plant
  double inductance_h = 0.0;
  double resistance_ohm = 0.0;
};

/// Grid impedance with X_g = 1 / SCR (pu) and R_g = X_g / (X/R).
GridImpedance scr_to_grid_impedance(double scr, const BaseValues& base, double x_over_r);

/// Inverse: short-circuit ratio implied by an inductance in henry.
double grid_inductance_to_scr(double inductance_h, const BaseValues& base);

/// Current drawn by a constant-power load, i = 2/3 P v / ||v||^2, with the
/// same 3/2 power convention as instantaneous_power(). Below `v_cutoff` the load
/// becomes the constant impedance that matches at the cutoff.
AlphaBeta constant_power_load_current(const AlphaBeta& v, double p_load, double v_cutoff = 0.3);

/// Equivalent shunt conductance of a constant-power load in the per-unit
/// plant (power = v'i): G = P / max(||v||, v_cutoff)^2.
double constant_power_load_conductance(double v_magnitude, double p_load_pu, double v_cutoff = 0.3);

struct FilterParams {
  double l_f = 0.0;  ///< inductance, pu * s
  double r_f = 0.0;
  double c_f = 0.0;  ///< capacitance, pu * s
};

struct InfiniteBus {
  FilterParams filter;
  double l_g = 0.0;  ///< grid inductance, pu * s
  double r_g = 0.0;
  double scr = 0.0;  ///< informational
  bool breaker_closed = true;
};

struct TwoBus {
  FilterParams filter1;
  FilterParams filter2;
  double l_t = 0.0;  ///< transformer series inductance (pu * s), per converter
  double r_t = 0.0;
  double line_l = 0.0;  ///< per km, pu * s
  double line_r = 0.0;  ///< per km
  double line_c = 0.0;  ///< per km, pu * s
  double line_km = 1.0;
  double r_load1 = 0.0;
  double r_load2 = 0.0;
  double r_fault = 1e-3;
  double cpl_v_cutoff = 0.3;
  bool vsc2_connected = false;
  bool load1_connected = false;
  bool load2_connected = false;
};

using Topology = std::variant<InfiniteBus, TwoBus>;

struct GridSource {
  double magnitude = 1.0;
  double phase = 0.0;  ///< unwrapped
  double omega = 0.0;  ///< rad/s
};

struct Setpoint {
  double p_star = 0.0;
  double q_star = 0.0;
};

struct Event {
  struct BreakerClose { std::string id; };
  struct BreakerOpen { std::string id; };
  struct GridVoltageSet { double magnitude; double phase_jump; };
  struct GridFrequencySet { double pu; };
  struct FaultApply {};
  struct FaultClear {};
  struct SetpointChange { int converter; double p_star; double q_star; };  ///< converter -1: all
  struct LoadRamp { double p_start; double p_end; double t_end; };

  using Kind = std::variant<BreakerClose, BreakerOpen, GridVoltageSet, GridFrequencySet,
                            FaultApply, FaultClear, SetpointChange, LoadRamp>;

  double time = 0.0;
  Kind kind;
};

struct ConverterMeasurement {
  AlphaBeta i_f;
  AlphaBeta v_f;
  AlphaBeta i_g;
};

class Plant {
 public:
  Plant(const Topology& topology, double omega_base);

  [[nodiscard]] int converter_count() const { return static_cast<int>(ports_.size()); }
  [[nodiscard]] ConverterMeasurement measure(int converter) const;

  void set_switching_voltage(int converter, const AlphaBeta& v_sw);
  [[nodiscard]] AlphaBeta switching_voltage(int converter) const { return v_sw_.at(converter); }

  /// One trapezoidal step; v_sw is held, the grid source is averaged over the step.
  void step(double tau_sim);

  /// Recomputes constant-power-load conductances from present bus voltages.
  void update_loads();

  /// Throws SimulationDiverged if any state is non-finite.
  void check_finite() const;

  void close_breaker(const std::string& id);
  void open_breaker(const std::string& id);
  void apply_fault();
  void clear_fault();
  [[nodiscard]] bool fault_active() const { return fault_active_; }

  GridSource& grid() { return grid_; }
  [[nodiscard]] const GridSource& grid() const { return grid_; }
  [[nodiscard]] bool has_grid_source() const { return grid_source_ >= 0; }

  void set_load_power(double p_pu) { p_load_ = p_pu; }
  [[nodiscard]] double omega_base() const { return omega_base_; }
  [[nodiscard]] double load_power() const { return p_load_; }

  /// Voltage at the constant-power-load bus (zero if none).
  [[nodiscard]] AlphaBeta load_bus_voltage() const;

  [[nodiscard]] double time() const { return t_; }
  void set_time(double t) { t_ = t; }

  /// Initializes the network to the sinusoidal steady state at `omega` with
  /// converter voltages v_sw (alpha-beta at the present time) and the grid source.
  void initialize_steady_state(const std::vector<AlphaBeta>& v_sw, double omega);

  [[nodiscard]] LinearNetwork& network() { return net_; }
  [[nodiscard]] const LinearNetwork& network() const { return net_; }

 private:
  struct Ports {
    int filter_branch = -1;
    int cap_node = -1;
    int grid_branch = -1;
    int source = -1;
  };
  struct Breaker {
    std::string id;
    bool is_branch = true;
    int index = -1;
  };

  void fill_inputs(LinearNetwork::Inputs& u, double phase) const;
  [[nodiscard]] const Breaker& breaker(const std::string& id) const;

  LinearNetwork net_;
  std::vector<Ports> ports_;
  std::vector<Breaker> breakers_;
  std::vector<AlphaBeta> v_sw_;
  GridSource grid_;
  int grid_source_ = -1;
  double prefault_magnitude_ = 1.0;
  int fault_shunt_ = -1;
  bool fault_active_ = false;
  int load_node_ = -1;
  double load_cutoff_ = 0.3;
  double p_load_ = 0.0;
  double t_ = 0.0;
  double omega_base_ = 0.0;
  LinearNetwork::Inputs u_begin_;
  LinearNetwork::Inputs u_end_;
};

/// Applies every event with time <= t exactly once; tracks load ramps.
class EventSchedule {
 public:
  EventSchedule() = default;
  explicit EventSchedule(std::vector<Event> events);

  /// Applies due events. Setpoint changes are written to `setpoints`.
  void apply_due(double t, Plant& plant, std::vector<Setpoint>& setpoints);

  [[nodiscard]] const std::vector<Event>& events() const { return events_; }
  [[nodiscard]] std::size_t applied_count() const { return next_; }

 private:
  struct Ramp {
    double t_start;
    double t_end;
    double p_start;
    double p_end;
  };

  std::vector<Event> events_;
  std::size_t next_ = 0;
  std::optional<Ramp> ramp_;
};

}  // namespace gfm
