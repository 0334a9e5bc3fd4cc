#include "gfm/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <variant>

#include "gfm/errors.hpp"

namespace gfm {

// ---------------------------------------------------------------------------
// Parameter sets

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ParameterSet::set(const std::string& key, const std::string& value, bool require_known) {
  if (key.empty()) throw ConfigError("empty parameter key");
  if (require_known && !has(key)) throw ConfigError("unknown parameter '" + key + "'");
  values_[key] = value;
}

void ParameterSet::set(const std::string& key, double value) { set(key, format_number(value)); }

double ParameterSet::number(const std::string& key) const {
  const std::string& s = text(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("parameter '" + key + "' is not a number: '" + s + "'");
  }
}

int ParameterSet::integer(const std::string& key) const {
  const double v = number(key);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw ConfigError("parameter '" + key + "' must be an integer");
  }
  return static_cast<int>(v);
}

bool ParameterSet::flag(const std::string& key) const {
  const std::string& s = text(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("parameter '" + key + "' must be a boolean");
}

const std::string& ParameterSet::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing parameter '" + key + "'");
  return it->second;
}

void ParameterSet::apply_overrides(const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + a + "' is not key=value");
    set(a.substr(0, eq), a.substr(eq + 1), true);
  }
}

// ---------------------------------------------------------------------------
// Presets and scenario defaults

namespace {

void common_defaults(ParameterSet& p) {
  p.set("droop.v_star", 1.0);
  p.set("droop.q_star", 0.0);
  p.set("ctrl.tau_ctr", 1e-4);
  p.set("controller.kind", "constraint_aware");
  p.set("controller.method", "admm");
  p.set("controller.rho", 5.0);
  p.set("controller.n_it", 5);
  p.set("controller.alpha", 1.6);
  p.set("controller.l_f_ratio", 1.0);
  p.set("controller.r_f_ratio", 1.0);
  p.set("controller.polar_samples", 3600);
  p.set("controller.empty_set", "best_effort");
  p.set("damping.k_rc", 0.1);
  p.set("damping.omega_rc", 1e4);
  p.set("baseline.k_vi", 0.0);
  p.set("baseline.i_thr", 1.0);
  p.set("baseline.rho_xr", 5.0);
  p.set("baseline.rho_xr_transient", 0.8);
  p.set("baseline.hpf_cutoff", 1000.0);
  p.set("baseline.i_lim", 1.2);
  p.set("baseline.kp_c", 1.0);
  p.set("baseline.ki_c", 0.24);
  p.set("baseline.kp_v", 0.55);
  p.set("baseline.ki_v", 0.23);
  p.set("baseline.k_ff_ig", 1.0);
  p.set("baseline.r_v", 0.1);
  p.set("baseline.x_v", 0.0);
  p.set("sim.tau_sim", 1e-6);
  p.set("sim.t_end", 1.0);
  p.set("sim.delay", 0.0);
  p.set("sim.trip_cycles", 2.0);
  p.set("grid.v", 1.0);
  p.set("grid.x_over_r", 3.0);
}

}  // namespace

ParameterSet preset_parameters(const std::string& preset) {
  ParameterSet p;
  common_defaults(p);
  p.set("preset", preset);
  if (preset == "vsc_208V_2kW") {
    p.set("base.v_ll", 208.0);
    p.set("base.s", 2000.0);
    p.set("base.f", 60.0);
    p.set("filter.l_f", 0.075);
    p.set("filter.r_f", 0.0076);
    p.set("filter.c_f", 0.09);
    p.set("limits.i_max", 1.2);
    p.set("limits.i_max_shrt", 1.5);
    p.set("limits.v_max", 1.178);
    p.set("droop.m_p", 0.03);
    p.set("droop.m_q", 0.03);
    p.set("droop.p_star", 0.5);
    p.set("droop.tau_v", 8e-3);
    p.set("droop.tau_lp", 5.3e-3);
    p.set("ctrl.tau_cyc", 20e-3);
    p.set("controller.w_omega", 0.5);
    p.set("grid.scr", 7.5);
  } else if (preset == "twobus_4160V") {
    p.set("base.v_ll", 480.0);
    p.set("base.s", 1e6);
    p.set("base.f", 60.0);
    p.set("filter.l_f", 0.1);
    p.set("filter.r_f", 0.01);
    p.set("filter.c_f", 0.05);
    p.set("limits.i_max", 1.1);
    p.set("limits.i_max2", 1.6);
    p.set("limits.i_max_shrt", 2.0);
    p.set("limits.v_max", 1.276);
    p.set("droop.m_p", 0.03);
    p.set("droop.m_q", 0.03);
    p.set("droop.p_star", 0.0);
    p.set("droop.tau_v", 8e-3);
    p.set("droop.tau_lp", 5.3e-3);
    p.set("ctrl.tau_cyc", 16.7e-3);
    p.set("controller.w_omega", 0.1);
    p.set("grid.scr", 7.5);
    p.set("twobus.grid_s", 1.5e6);
    p.set("twobus.l_t", 0.03);
    p.set("twobus.r_t", 0.002);
    p.set("twobus.line_l", 5.56e-2);
    p.set("twobus.line_r", 1.82e-2);
    p.set("twobus.line_c", 4.34e-5);
    p.set("twobus.line_km", 1.0);
    p.set("twobus.load1_kw", 500.0);
    p.set("twobus.load2_kw", 250.0);
    p.set("twobus.r_fault", 1e-3);
    p.set("twobus.cpl_cutoff", 0.3);
    p.set("sim.delay", 3e-6);
  } else if (preset == "hw_186V") {
    p.set("base.v_ll", 186.0);
    p.set("base.s", 1788.0);
    p.set("base.f", 60.0);
    p.set("filter.l_f", 0.084);
    p.set("filter.r_f", 0.01);
    p.set("filter.c_f", 0.08);
    p.set("limits.i_max", 1.2);
    p.set("limits.i_max_shrt", 1.5);
    p.set("limits.v_max", 1.31);
    p.set("droop.m_p", 0.05);
    p.set("droop.m_q", 0.05);
    p.set("droop.p_star", 0.8);
    p.set("droop.tau_v", 8e-3);
    p.set("droop.tau_lp", 5.3e-3);
    p.set("ctrl.tau_cyc", 20e-3);
    p.set("controller.w_omega", 0.2);
    p.set("grid.scr", 43.0);
    p.set("grid.x_over_r", 30.0);
  } else {
    throw ConfigError("unknown preset '" + preset + "'");
  }
  return p;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{
      "ib_steady",         "ib_fault",     "ib_robustness", "ib_freq_drop", "comparison_timeline",
      "voltage_support",   "two_bus",      "overload_trial"};
  return names;
}

namespace {

bool is_two_bus(const std::string& scenario) {
  return scenario == "two_bus" || scenario == "overload_trial";
}

}  // namespace

ParameterSet scenario_defaults(const std::string& scenario, const std::string& preset) {
  const auto& names = scenario_names();
  if (std::find(names.begin(), names.end(), scenario) == names.end()) {
    throw ConfigError("unknown scenario '" + scenario + "'");
  }
  const std::string natural = is_two_bus(scenario) ? "twobus_4160V" : "vsc_208V_2kW";
  if (!preset.empty() && is_two_bus(scenario) != (preset == "twobus_4160V")) {
    throw ConfigError("preset '" + preset + "' does not fit scenario '" + scenario + "'");
  }
  ParameterSet p = preset_parameters(preset.empty() ? natural : preset);
  if (scenario == "ib_steady") {
    p.set("sim.t_end", 0.5);
  } else if (scenario == "ib_fault" || scenario == "ib_robustness") {
    p.set("sim.t_end", 1.5);
    p.set("fault.start", 0.4);
    p.set("fault.duration", 0.3);
    if (scenario == "ib_robustness") {
      p.set("controller.rho", 1.0);
      p.set("controller.n_it", 10);
    }
  } else if (scenario == "ib_freq_drop") {
    p.set("sim.t_end", 1.4);
    p.set("freq.start", 0.4);
    p.set("freq.duration", 0.5);
    p.set("freq.pu", 0.95);
  } else if (scenario == "comparison_timeline") {
    p.set("sim.t_end", 2.2);
    p.set("droop.p_star", 0.0);
    p.set("sync.offset_deg", 180.0);
    p.set("sync.close", 0.1);
    p.set("setpoint.time", 0.6);
    p.set("setpoint.p_star", 0.5);
    p.set("freq.start", 0.7);
    p.set("freq.duration", 0.2);
    p.set("freq.pu", 0.95);
    p.set("fault.start", 1.2);
    p.set("fault.duration", 0.1667);
  } else if (scenario == "voltage_support") {
    p.set("sim.t_end", 0.8);
    p.set("sag.start", 0.4);
    p.set("sag.duration", 0.3);
    p.set("sag.v", 0.2);
  } else if (scenario == "two_bus") {
    p.set("sim.t_end", 1.8);
    p.set("event.vsc2_close", 0.2);
    p.set("event.load1_close", 0.3);
    p.set("event.load2_close", 0.5);
    p.set("setpoint.time", 0.5);
    p.set("setpoint.p_star", 0.55);
    p.set("fault.start", 0.6);
    p.set("fault.duration", 0.16);
    p.set("cpl.start", 1.0);
    p.set("cpl.end", 1.4);
    p.set("cpl.kw", 800.0);
  } else if (scenario == "overload_trial") {
    p.set("sim.t_end", 2.2);
    p.set("event.vsc2_close", 0.2);
    p.set("event.load1_close", 0.3);
    p.set("event.load2_close", 0.5);
    p.set("setpoint.time", 0.5);
    p.set("setpoint.p_star", 0.55);
    p.set("cpl.start", 1.0);
    p.set("cpl.end", 1.4);
    p.set("cpl.kw", 800.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

constexpr double kPi = std::numbers::pi;

/// Everything a run needs, resolved from a parameter set.
struct Setup {
  BaseValues base;
  double omega_b = 0.0;
  FilterParams filter;
  std::vector<ConverterRatings> model;  // controller view, per converter
  std::vector<double> i_max;            // true limits, per converter
  DroopParams droop;
  DampingParams damping;
  std::string kind;
  ProjectionMethod method = ProjectionMethod::Admm;
  AdmmConfig admm;
  double w_omega = 0.5;
  int polar_samples = 3600;
  EmptySetPolicy empty_set = EmptySetPolicy::BestEffort;
  BaselineParams baseline;
  double tau_sim = 1e-6;
  double t_end = 1.0;
  double delay = 0.0;
  double trip_cycles = 2.0;
  Topology topology;
  std::vector<Event> events;
  Window event;
  std::vector<Window> disturbances;
  double initial_theta = 0.0;
  bool operating_point_init = true;  // solve for P* at t = 0
  double assess_from = 0.0;
};

BaselineVariant baseline_variant(const std::string& kind) {
  if (kind == "variable_vi") return BaselineVariant::VariableVI;
  if (kind == "current_ref_limit") return BaselineVariant::CurrentRefLimit;
  if (kind == "threshold_vi") return BaselineVariant::ThresholdVI;
  throw ConfigError("unknown controller.kind '" + kind + "'");
}

Setup resolve(const std::string& scenario, const ParameterSet& p) {
  Setup s;
  s.base = {p.number("base.v_ll"), p.number("base.s"), p.number("base.f")};
  if (!(s.base.v_ll_rms > 0 && s.base.s_base > 0 && s.base.f_base > 0)) {
    throw ConfigError("base values must be > 0");
  }
  s.omega_b = s.base.omega_base();
  s.filter = {p.number("filter.l_f") / s.omega_b, p.number("filter.r_f"),
              p.number("filter.c_f") / s.omega_b};

  const bool two_bus = is_two_bus(scenario);
  s.i_max.push_back(p.number("limits.i_max"));
  if (two_bus) s.i_max.push_back(p.number("limits.i_max2"));
  for (double im : s.i_max) {
    ConverterRatings r;
    r.l_f = s.filter.l_f * p.number("controller.l_f_ratio");
    r.r_f = s.filter.r_f * p.number("controller.r_f_ratio");
    r.c_f = s.filter.c_f;
    r.i_max = im;
    r.i_max_shrt = std::max(im, p.number("limits.i_max_shrt"));
    r.v_max = p.number("limits.v_max");
    r.v_dc = 2.0 * r.v_max;
    s.model.push_back(r);
  }

  s.droop.m_p = p.number("droop.m_p");
  s.droop.m_q = p.number("droop.m_q");
  s.droop.omega_0 = s.omega_b;
  s.droop.v_star = p.number("droop.v_star");
  s.droop.p_star = p.number("droop.p_star");
  s.droop.q_star = p.number("droop.q_star");
  s.droop.tau_v = p.number("droop.tau_v");
  s.droop.tau_lp = p.number("droop.tau_lp");
  s.droop.tau_ctr = p.number("ctrl.tau_ctr");
  s.droop.tau_cyc = p.number("ctrl.tau_cyc");
  s.droop.validate();
  s.damping = {p.number("damping.k_rc"), p.number("damping.omega_rc")};
  s.damping.validate();

  s.kind = p.text("controller.kind");
  const std::string& method = p.text("controller.method");
  if (method == "admm") {
    s.method = ProjectionMethod::Admm;
  } else if (method == "polar") {
    s.method = ProjectionMethod::Polar;
  } else {
    throw ConfigError("controller.method must be admm or polar");
  }
  s.admm.rho = p.number("controller.rho");
  s.admm.n_it = p.integer("controller.n_it");
  s.admm.alpha = p.number("controller.alpha");
  s.w_omega = p.number("controller.w_omega");
  s.polar_samples = p.integer("controller.polar_samples");
  const std::string& policy = p.text("controller.empty_set");
  if (policy == "best_effort") {
    s.empty_set = EmptySetPolicy::BestEffort;
  } else if (policy == "hold") {
    s.empty_set = EmptySetPolicy::Hold;
  } else {
    throw ConfigError("controller.empty_set must be best_effort or hold");
  }
  if (s.kind != "constraint_aware" && s.kind != "droop") {
    s.baseline.variant = baseline_variant(s.kind);
  }
  s.baseline.k_vi = p.number("baseline.k_vi");
  s.baseline.i_thr = p.number("baseline.i_thr");
  s.baseline.rho_xr = p.number("baseline.rho_xr");
  s.baseline.rho_xr_transient = p.number("baseline.rho_xr_transient");
  s.baseline.hpf_cutoff = p.number("baseline.hpf_cutoff");
  s.baseline.i_lim = p.number("baseline.i_lim");
  s.baseline.pi_current = {p.number("baseline.kp_c"), p.number("baseline.ki_c")};
  s.baseline.pi_voltage = {p.number("baseline.kp_v"), p.number("baseline.ki_v")};
  s.baseline.k_ff_ig = p.number("baseline.k_ff_ig");
  s.baseline.r_v = p.number("baseline.r_v");
  s.baseline.x_v = p.number("baseline.x_v");

  s.tau_sim = p.number("sim.tau_sim");
  if (!(s.tau_sim >= 1e-7 && s.tau_sim <= 1e-4)) throw ConfigError("sim.tau_sim must lie in [1e-7, 1e-4]");
  if (s.tau_sim > s.droop.tau_ctr) throw ConfigError("sim.tau_sim must not exceed ctrl.tau_ctr");
  s.t_end = p.number("sim.t_end");
  if (!(s.t_end > 0.0)) throw ConfigError("sim.t_end must be > 0");
  s.delay = p.number("sim.delay");
  if (s.delay < 0.0 || s.delay >= s.droop.tau_ctr) throw ConfigError("sim.delay must lie in [0, tau_ctr)");
  s.trip_cycles = p.number("sim.trip_cycles");

  using E = Event;
  auto add = [&](double t, E::Kind k) { s.events.push_back({t, std::move(k)}); };

  if (!two_bus) {
    InfiniteBus ib;
    ib.filter = s.filter;
    const GridImpedance g = scr_to_grid_impedance(p.number("grid.scr"), s.base, p.number("grid.x_over_r"));
    ib.l_g = g.inductance_pu;
    ib.r_g = g.r_pu;
    ib.scr = p.number("grid.scr");
    ib.breaker_closed = scenario != "comparison_timeline";
    s.topology = ib;
  } else {
    TwoBus tb;
    tb.filter1 = s.filter;
    tb.filter2 = s.filter;
    tb.l_t = p.number("twobus.l_t") / s.omega_b;
    tb.r_t = p.number("twobus.r_t");
    // Line data are on the grid base; rescale to the converter base.
    const double ratio = s.base.s_base / p.number("twobus.grid_s");
    tb.line_l = p.number("twobus.line_l") * ratio / s.omega_b;
    tb.line_r = p.number("twobus.line_r") * ratio;
    tb.line_c = p.number("twobus.line_c") / ratio / s.omega_b;
    tb.line_km = p.number("twobus.line_km");
    tb.r_load1 = s.base.s_base / (1e3 * p.number("twobus.load1_kw"));
    tb.r_load2 = s.base.s_base / (1e3 * p.number("twobus.load2_kw"));
    tb.r_fault = p.number("twobus.r_fault");
    tb.cpl_v_cutoff = p.number("twobus.cpl_cutoff");
    s.topology = tb;
  }

  if (scenario == "ib_steady") {
    s.event = {"steady", 0.2, s.t_end};
  } else if (scenario == "ib_fault" || scenario == "ib_robustness") {
    const double t0 = p.number("fault.start");
    const double t1 = t0 + p.number("fault.duration");
    add(t0, E::FaultApply{});
    add(t1, E::FaultClear{});
    s.event = {"fault", t0, t1};
    s.disturbances = {s.event};
  } else if (scenario == "ib_freq_drop") {
    const double t0 = p.number("freq.start");
    const double t1 = t0 + p.number("freq.duration");
    add(t0, E::GridFrequencySet{p.number("freq.pu")});
    add(t1, E::GridFrequencySet{1.0});
    s.event = {"freq_drop", t0, t1};
    s.disturbances = {s.event};
  } else if (scenario == "comparison_timeline") {
    s.initial_theta = p.number("sync.offset_deg") * kPi / 180.0;
    s.operating_point_init = false;
    const double t_close = p.number("sync.close");
    add(t_close, E::BreakerClose{"s_vsc"});
    add(p.number("setpoint.time"), E::SetpointChange{-1, p.number("setpoint.p_star"), 0.0});
    const double f0 = p.number("freq.start");
    const double f1 = f0 + p.number("freq.duration");
    add(f0, E::GridFrequencySet{p.number("freq.pu")});
    add(f1, E::GridFrequencySet{1.0});
    const double t0 = p.number("fault.start");
    const double t1 = t0 + p.number("fault.duration");
    add(t0, E::FaultApply{});
    add(t1, E::FaultClear{});
    s.event = {"fault", t0, t1};
    s.disturbances = {{"sync", t_close, t_close}, {"freq_drop", f0, f1}, {"fault", t0, t1}};
    s.assess_from = t_close;
  } else if (scenario == "voltage_support") {
    const double t0 = p.number("sag.start");
    const double t1 = t0 + p.number("sag.duration");
    add(t0, E::GridVoltageSet{p.number("sag.v") * p.number("grid.v"), 0.0});
    add(t1, E::GridVoltageSet{p.number("grid.v"), 0.0});
    s.event = {"sag", t0, t1};
    s.disturbances = {s.event};
  } else {
    s.operating_point_init = false;
    const double t_vsc2 = p.number("event.vsc2_close");
    add(t_vsc2, E::BreakerClose{"s_vsc2"});
    add(p.number("event.load1_close"), E::BreakerClose{"s_l1"});
    add(p.number("event.load2_close"), E::BreakerClose{"s_l2"});
    add(p.number("setpoint.time"), E::SetpointChange{-1, p.number("setpoint.p_star"), 0.0});
    const double c0 = p.number("cpl.start");
    const double c1 = p.number("cpl.end");
    add(c0, E::LoadRamp{0.0, 1e3 * p.number("cpl.kw") / s.base.s_base, c1});
    s.disturbances = {{"vsc2", t_vsc2, t_vsc2},
                      {"load1", p.number("event.load1_close"), p.number("event.load1_close")},
                      {"load2", p.number("event.load2_close"), p.number("event.load2_close")},
                      {"cpl", c0, c1}};
    if (scenario == "two_bus") {
      const double t0 = p.number("fault.start");
      const double t1 = t0 + p.number("fault.duration");
      add(t0, E::FaultApply{});
      add(t1, E::FaultClear{});
      s.event = {"fault", t0, t1};
      s.disturbances.push_back(s.event);
    } else {
      s.event = {"cpl", c0, s.t_end};
    }
    s.assess_from = t_vsc2;
  }
  return s;
}

/// Polymorphic wrapper over the controller variants.
class AnyController {
 public:
  AnyController(const Setup& s, const ConverterRatings& model, double i_max) {
    if (s.kind == "constraint_aware") {
      ConstraintAwareConfig cfg;
      cfg.droop = s.droop;
      cfg.damping = s.damping;
      cfg.model = model;
      cfg.method = s.method;
      cfg.admm = s.admm;
      cfg.w_omega_pu = s.w_omega;
      cfg.polar_samples = s.polar_samples;
      cfg.empty_set = s.empty_set;
      ca_ = std::make_unique<ConstraintAwareController>(cfg);
    } else if (s.kind == "droop") {
      droop_ = s.droop;
      damping_ = s.damping;
    } else {
      BaselineParams bp = s.baseline;
      if (i_max != s.i_max.front() || s.i_max.size() > 1) bp.i_lim = i_max;
      bl_ = std::make_unique<BaselineController>(bp, s.droop, s.damping, model, s.omega_b);
    }
  }

  [[nodiscard]] const ConstraintAwareController* constraint_aware() const { return ca_.get(); }

  StepOutput step(const FilterMeasurement& m) {
    if (ca_) return ca_->step(state_.droop, m);
    if (bl_) return bl_->step(state_, m);
    return unconstrained_droop_step(state_.droop, m, droop_, damping_);
  }

  void set_setpoint(double p, double q) {
    if (ca_) ca_->set_setpoint(p, q);
    if (bl_) bl_->set_setpoint(p, q);
    droop_.p_star = p;
    droop_.q_star = q;
  }

  [[nodiscard]] bool uses_inner_loops() const {
    return bl_ && bl_->params().variant != BaselineVariant::ThresholdVI;
  }

  BaselineState& state() { return state_; }

 private:
  std::unique_ptr<ConstraintAwareController> ca_;
  std::unique_ptr<BaselineController> bl_;
  DroopParams droop_;
  DampingParams damping_;
  BaselineState state_;
};

FilterMeasurement to_filter_measurement(const ConverterMeasurement& m) {
  return {m.i_f, m.v_f, m.i_g};
}

/// Places the plant and controllers in the sinusoidal steady state.
///
/// Converters that regulate the filter voltage through inner loops get the
/// switching voltage that puts v_f at the droop voltage, with integrators
/// preset to their steady values; the others apply the droop voltage directly.
void initialize(Plant& plant, std::vector<AnyController>& ctrls, const Setup& s,
                const std::vector<double>& theta, const std::vector<double>& vmag) {
  const int n = plant.converter_count();
  const double w = s.droop.omega_0;
  std::vector<AlphaBeta> v_sw(n);
  for (int c = 0; c < n; ++c) v_sw[c] = to_alpha_beta(Dq{vmag[c], 0.0}, theta[c]);

  // Steady v_f is affine in the switching voltages; solve for inner-loop converters.
  for (int c = 0; c < n; ++c) {
    if (!ctrls[c].uses_inner_loops()) continue;
    const AlphaBeta target = to_alpha_beta(Dq{vmag[c], 0.0}, theta[c]);
    auto vf_for = [&](const AlphaBeta& u) {
      std::vector<AlphaBeta> trial = v_sw;
      trial[c] = u;
      plant.initialize_steady_state(trial, w);
      return plant.measure(c).v_f;
    };
    const AlphaBeta base = vf_for({0.0, 0.0});
    const AlphaBeta ex = vf_for({1.0, 0.0}) - base;
    const AlphaBeta ey = vf_for({0.0, 1.0}) - base;
    const AlphaBeta rhs = target - base;
    const double det = ex.x * ey.y - ey.x * ex.y;
    v_sw[c] = {(rhs.x * ey.y - ey.x * rhs.y) / det, (ex.x * rhs.y - rhs.x * ex.y) / det};
  }
  plant.initialize_steady_state(v_sw, w);

  for (int c = 0; c < n; ++c) {
    BaselineState& st = ctrls[c].state();
    const ConverterMeasurement m = plant.measure(c);
    const PowerPair pq = per_unit_power(m.v_f, m.i_f);
    st.droop.theta = theta[c];
    st.droop.v = vmag[c];
    st.droop.p_lp = pq.p;
    st.droop.q_lp = pq.q;
    st.droop.omega_out = w;
    if (ctrls[c].uses_inner_loops()) {
      const Dq i_f = to_dq(m.i_f, theta[c]);
      const Dq v_f = to_dq(m.v_f, theta[c]);
      const Dq i_g = to_dq(m.i_g, theta[c]);
      const Dq u = to_dq(v_sw[c], theta[c]);
      st.xi_v = i_f - i_g - w * s.model[c].c_f * quarter_turn(v_f);
      st.xi_c = u - v_f - w * s.model[c].l_f * quarter_turn(i_f);
      st.i_lp = i_f;
    }
  }
}

/// Operating point of a single converter on the infinite bus: the angle that
/// delivers P* and the magnitude consistent with reactive droop.
void solve_infinite_bus_operating_point(Plant& plant, std::vector<AnyController>& ctrls,
                                        const Setup& s, double& theta, double& vmag) {
  vmag = s.droop.v_star;
  theta = 0.0;
  for (int outer = 0; outer < 30; ++outer) {
    double lo = -1.4;
    double hi = 1.4;
    PowerPair pq;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      initialize(plant, ctrls, s, {mid}, {vmag});
      const ConverterMeasurement m = plant.measure(0);
      pq = per_unit_power(m.v_f, m.i_f);
      if (pq.p < s.droop.p_star) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    theta = 0.5 * (lo + hi);
    const double v_new = s.droop.v_star + s.droop.m_q * (s.droop.q_star - pq.q);
    if (std::abs(v_new - vmag) < 1e-12) break;
    vmag = v_new;
  }
  initialize(plant, ctrls, s, {theta}, {vmag});
}

}  // namespace

RunResult run_scenario(const std::string& scenario, const ParameterSet& params,
                       const RunOptions& options) {
  const auto wall0 = std::chrono::steady_clock::now();
  const Setup s = resolve(scenario, params);

  Plant plant(s.topology, s.omega_b);
  plant.grid().magnitude = params.number("grid.v");
  const int n = plant.converter_count();
  std::vector<AnyController> ctrls;
  ctrls.reserve(n);
  for (int c = 0; c < n; ++c) ctrls.emplace_back(s, s.model[c], s.i_max[c]);

  if (s.operating_point_init) {
    double theta = 0.0;
    double vmag = 1.0;
    solve_infinite_bus_operating_point(plant, ctrls, s, theta, vmag);
  } else {
    initialize(plant, ctrls, s, std::vector<double>(n, s.initial_theta),
               std::vector<double>(n, s.droop.v_star));
  }

  const double ratio = s.droop.tau_ctr / s.tau_sim;
  const int n_sub = static_cast<int>(std::lround(ratio));
  if (std::abs(ratio - n_sub) > 1e-6) throw ConfigError("ctrl.tau_ctr must be a multiple of sim.tau_sim");
  const int delay_steps = static_cast<int>(std::lround(s.delay / s.tau_sim));
  const long n_ctrl = std::lround(s.t_end / s.droop.tau_ctr);
  const double trip_after = s.trip_cycles / s.base.f_base;

  EventSchedule schedule(s.events);
  std::vector<Setpoint> setpoints(n, Setpoint{s.droop.p_star, s.droop.q_star});

  RunResult result;
  result.scenario = scenario;
  result.params = params;
  result.series.assign(n, {});
  for (auto& ser : result.series) ser.reserve(static_cast<std::size_t>(n_ctrl) + 1);
  if (options.log_full) result.full_rate.assign(n, {});
  result.event = s.event;
  result.disturbances = s.disturbances;

  std::vector<double> infeasible_time(n, 0.0);
  std::vector<AlphaBeta> pending(n);
  long modulation_clipped = 0;
  double max_infeasible = 0.0;

  for (long k = 0; k <= n_ctrl; ++k) {
    const double t = static_cast<double>(k) * s.droop.tau_ctr;
    plant.set_time(t);
    schedule.apply_due(t, plant, setpoints);
    for (int c = 0; c < n; ++c) ctrls[c].set_setpoint(setpoints[c].p_star, setpoints[c].q_star);
    plant.update_loads();

    for (int c = 0; c < n; ++c) {
      const ConverterMeasurement m = plant.measure(c);
      if (options.observer && ctrls[c].constraint_aware()) {
        options.observer(c, t, *ctrls[c].constraint_aware(), ctrls[c].state().droop,
                         to_filter_measurement(m));
      }
      const StepOutput out = ctrls[c].step(to_filter_measurement(m));
      // The modulator cannot synthesize more than v_dc / 2; count every clip.
      pending[c] = out.v_sw;
      const double v_lim = 0.5 * s.model[c].v_dc;
      if (out.v_sw.norm() > v_lim * (1.0 + 1e-9)) {
        ++modulation_clipped;
        pending[c] = out.v_sw * (v_lim / out.v_sw.norm());
      }

      Sample smp;
      smp.t = t;
      smp.i_f = m.i_f;
      smp.v_f = m.v_f;
      smp.theta = out.diag.theta;
      smp.v = out.diag.v;
      smp.omega_pu = out.diag.omega / s.droop.omega_0;
      smp.p = out.diag.p;
      smp.q = out.diag.q;
      smp.p_lp = ctrls[c].state().droop.p_lp;
      smp.p_star = setpoints[c].p_star;
      smp.active = out.diag.active;
      smp.feasible = out.diag.feasible;
      result.series[c].push_back(smp);

      if (!out.diag.feasible) {
        infeasible_time[c] += s.droop.tau_ctr;
        max_infeasible = std::max(max_infeasible, infeasible_time[c]);
        if (infeasible_time[c] > trip_after + 1e-12) {
          throw InfeasibleTrip("feasible set empty for more than " + format_number(s.trip_cycles) +
                                   " cycles (converter " + std::to_string(c + 1) + ")",
                               t);
        }
      } else {
        infeasible_time[c] = 0.0;
      }
    }
    if (k == n_ctrl) break;

    for (int sub = 0; sub < n_sub; ++sub) {
      if (sub == delay_steps) {
        for (int c = 0; c < n; ++c) plant.set_switching_voltage(c, pending[c]);
      }
      plant.step(s.tau_sim);
      if (options.log_full) {
        for (int c = 0; c < n; ++c) {
          Sample smp = result.series[c].back();
          const ConverterMeasurement m = plant.measure(c);
          smp.t = t + (sub + 1) * s.tau_sim;
          smp.i_f = m.i_f;
          smp.v_f = m.v_f;
          result.full_rate[c].push_back(smp);
        }
      }
    }
    plant.check_finite();
  }

  MetricContext ctx;
  ctx.event = s.event;
  ctx.disturbances = s.disturbances;
  ctx.i_max = s.i_max.front();
  ctx.m_p = s.droop.m_p;
  ctx.f_base = s.base.f_base;
  ctx.omega_0 = s.droop.omega_0;
  ctx.tau_ctr = s.droop.tau_ctr;
  ctx.assess_from = s.assess_from;
  for (const auto& x : result.series.front()) {
    if (x.t <= s.event.end) ctx.p_star = x.p_star;
  }
  result.metrics = compute_metrics(result.series.front(), ctx);

  // Scenario-specific figures.
  const Series& s0 = result.series.front();
  auto window_peak = [&](const Series& ser, double a, double b) {
    double peak = 0.0;
    for (const auto& x : ser) {
      if (x.t >= a && x.t <= b) peak = std::max(peak, x.i_f.norm());
    }
    return peak;
  };
  auto window_mean = [&](const Series& ser, double a, double b, auto&& f) {
    double sum = 0.0;
    int cnt = 0;
    for (const auto& x : ser) {
      if (x.t >= a && x.t <= b) {
        sum += f(x);
        ++cnt;
      }
    }
    return cnt ? sum / cnt : 0.0;
  };
  const double cycle = 1.0 / s.base.f_base;
  result.extras["modulation_clipped_samples"] = static_cast<double>(modulation_clipped);
  result.extras["max_infeasible_time"] = max_infeasible;
  if (s.event.end > s.event.start) {
    // Time from event start until |i_f| first reaches 95 % of i_max.
    double reach = kNeverSettles;
    for (const auto& x : s0) {
      if (x.t >= s.event.start && x.t <= s.event.end && x.i_f.norm() >= 0.95 * ctx.i_max) {
        reach = x.t - s.event.start;
        break;
      }
    }
    result.extras["time_to_95pct_limit"] = reach;
    const double ripple_limit = kOscillationFraction * ctx.i_max;
    const bool osc = oscillation_detected(s0, s.event, s.base.f_base, ripple_limit);
    result.extras["oscillating"] = osc ? 1.0 : 0.0;
    const double a = s.event.end - 5.0 * cycle;
    result.extras["steady_voltage"] =
        window_mean(s0, a, s.event.end, [](const Sample& x) { return x.v_f.norm(); });
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = 0.0;
    for (const auto& x : s0) {
      if (x.t >= s.event.start + 5.0 * cycle && x.t <= s.event.end) {
        vmin = std::min(vmin, x.v_f.norm());
        vmax = std::max(vmax, x.v_f.norm());
      }
    }
    result.extras["voltage_min_in_event"] = vmin;
    result.extras["voltage_max_in_event"] = vmax;
  }
  if (scenario == "comparison_timeline") {
    const Window& fd = s.disturbances[1];
    const Window& fault = s.disturbances[2];
    result.extras["peak_current_freq_drop"] = window_peak(s0, fd.start, fd.end);
    result.extras["peak_current_after_sync"] = window_peak(s0, s.assess_from, fd.start);
    result.extras["lost_sync_after_fault"] = detect_lost_sync(s0, ctx, fault.end, s.t_end) ? 1.0 : 0.0;
    result.extras["lost_sync_before_fault"] = detect_lost_sync(s0, ctx, s.assess_from, fault.start) ? 1.0 : 0.0;
  }
  if (is_two_bus(scenario)) {
    const double a = s.t_end - 5.0 * cycle;
    const Series& s1 = result.series[1];
    result.extras["vsc1_peak_current"] = window_peak(s0, s.assess_from, s.t_end);
    result.extras["vsc2_peak_current"] = window_peak(s1, s.assess_from, s.t_end);
    result.extras["final_frequency"] = window_mean(s0, a, s.t_end, [](const Sample& x) { return x.omega_pu; });
    result.extras["final_voltage_vsc1"] = window_mean(s0, a, s.t_end, [](const Sample& x) { return x.v_f.norm(); });
    result.extras["final_voltage_vsc2"] = window_mean(s1, a, s.t_end, [](const Sample& x) { return x.v_f.norm(); });
    result.extras["final_current_vsc1"] = window_mean(s0, a, s.t_end, [](const Sample& x) { return x.i_f.norm(); });
    result.extras["final_current_vsc2"] = window_mean(s1, a, s.t_end, [](const Sample& x) { return x.i_f.norm(); });
    MetricContext ctx2 = ctx;
    ctx2.i_max = s.i_max[1];
    result.extras["lost_sync_vsc2"] = detect_lost_sync(s1, ctx2, s.assess_from, s.t_end) ? 1.0 : 0.0;
    result.extras["final_load_bus_voltage"] = plant.load_bus_voltage().norm();
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return result;
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<double> estimate_frequency(const std::vector<double>& theta, double dt, double omega_0,
                                       double window) {
  const std::size_t n = theta.size();
  if (!(dt > 0.0) || !(omega_0 > 0.0)) throw ConfigError("estimate_frequency needs dt, omega_0 > 0");
  const int half = std::max(1, static_cast<int>(std::lround(0.5 * window / dt)));
  if (window < 2.0 * dt) throw ConfigError("frequency window must span at least two samples");
  std::vector<double> raw(n, 0.0);
  if (n < 2) return raw;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = k + 1 < n ? k + 1 : n - 1;
    raw[k] = (theta[b] - theta[a]) / ((b - a) * dt * omega_0);
  }
  // Moving average via the telescoping sum of theta over the window.
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t a = k >= static_cast<std::size_t>(half) ? k - half : 0;
    const std::size_t b = std::min(n - 1, k + half);
    out[k] = b > a ? (theta[b] - theta[a]) / ((b - a) * dt * omega_0) : raw[k];
  }
  return out;
}

double settling_time(const std::vector<double>& t, const std::vector<double>& x, double t_event,
                     double target, double band) {
  if (!(band > 0.0)) throw ConfigError("settling band must be > 0");
  if (t.size() != x.size()) throw ConfigError("settling_time needs equal-length series");
  const double tol = band * std::abs(target);
  // Walk backwards to the last sample outside the band.
  std::size_t first_ok = t.size();
  for (std::size_t k = t.size(); k-- > 0;) {
    if (t[k] < t_event) break;
    if (std::abs(x[k] - target) > tol) break;
    first_ok = k;
  }
  if (first_ok == t.size()) return kNeverSettles;
  return std::max(0.0, t[first_ok] - t_event);
}

bool oscillation_detected(const Series& s, const Window& w, double f_base, double threshold) {
  const double a = w.end - 5.0 / f_base;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& x : s) {
    if (x.t >= a && x.t <= w.end) {
      lo = std::min(lo, x.i_f.norm());
      hi = std::max(hi, x.i_f.norm());
    }
  }
  return hi - lo > threshold;
}

bool detect_lost_sync(const Series& s, const MetricContext& ctx, double from, double to) {
  if (s.size() < 3) return false;
  std::vector<double> theta(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) theta[k] = s[k].theta;
  const double cycle = 1.0 / ctx.f_base;
  const std::vector<double> f = estimate_frequency(theta, ctx.tau_ctr, ctx.omega_0, cycle);

  const double grace = 5.0 * cycle;
  auto in_disturbance = [&](double t) {
    for (const auto& w : ctx.disturbances) {
      if (t >= w.start && t <= w.end + grace) return true;
    }
    return false;
  };

  double f_run = 0.0;
  double p_run = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double t = s[k].t;
    if (t < from || t > to) {
      f_run = p_run = 0.0;
      continue;
    }
    f_run = std::abs(f[k] - 1.0) > 0.15 ? f_run + ctx.tau_ctr : 0.0;
    if (f_run > 2.0 * cycle) return true;
    if (in_disturbance(t)) {
      p_run = 0.0;
    } else {
      p_run = std::abs(s[k].p_lp - s[k].p_star) > 0.5 ? p_run + ctx.tau_ctr : 0.0;
      if (p_run > 10.0 * cycle) return true;
    }
  }
  return false;
}

Metrics compute_metrics(const Series& s, const MetricContext& ctx) {
  Metrics m;
  if (s.empty()) return m;
  const double cycle = 1.0 / ctx.f_base;
  const Window& w = ctx.event;

  std::vector<double> t;
  std::vector<double> imag;
  std::vector<double> vmag;
  for (const auto& x : s) {
    if (x.t >= w.start) m.peak_current = std::max(m.peak_current, x.i_f.norm());
    m.limit_violation_integral += std::max(0.0, x.i_f.norm() - ctx.i_max) * ctx.tau_ctr;
    if (x.t >= w.start && x.t <= w.end) {
      t.push_back(x.t);
      imag.push_back(x.i_f.norm());
      vmag.push_back(x.v_f.norm());
    }
  }

  // Steady values: means over the last five cycles of the event window.
  const double a = w.end - 5.0 * cycle;
  double i_sum = 0.0;
  double v_sum = 0.0;
  double p_sum = 0.0;
  int cnt = 0;
  const Sample* first = nullptr;
  const Sample* last = nullptr;
  for (const auto& x : s) {
    if (x.t >= a && x.t <= w.end) {
      if (!first) first = &x;
      last = &x;
      i_sum += x.i_f.norm();
      v_sum += x.v_f.norm();
      p_sum += x.p;
      ++cnt;
    }
  }
  if (cnt > 1) {
    m.steady_current = i_sum / cnt;
    const double v_steady = v_sum / cnt;
    m.settle_time_current = settling_time(t, imag, w.start, m.steady_current);
    m.settle_time_voltage = settling_time(t, vmag, w.start, v_steady);
    m.freq_mean_during_event = (last->theta - first->theta) / ((last->t - first->t) * ctx.omega_0);
    const double f_droop = 1.0 + ctx.m_p * (ctx.p_star - p_sum / cnt);
    m.freq_error_vs_droop = std::abs(m.freq_mean_during_event - f_droop) / f_droop;
  }
  m.steady_current = std::min(m.steady_current, m.peak_current);
  m.lost_sync = detect_lost_sync(s, ctx, ctx.assess_from, s.back().t);
  return m;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<RobustnessRow> robustness_sweep(const ParameterSet& base,
                                            const std::vector<double>& l_ratios,
                                            const std::vector<double>& r_ratios) {
  std::vector<RobustnessRow> rows;
  for (double lr : l_ratios) {
    for (double rr : r_ratios) {
      RobustnessRow row;
      row.l_ratio = lr;
      row.r_ratio = rr;
      ParameterSet p = base;
      p.set("controller.l_f_ratio", lr);
      p.set("controller.r_f_ratio", rr);
      try {
        const RunResult r = run_scenario("ib_robustness", p);
        row.peak = r.metrics.peak_current;
        row.steady = r.metrics.steady_current;
        row.oscillating = r.extras.at("oscillating") != 0.0;
      } catch (const ConfigError&) {
        // r_f = 0 is rejected by the predictor; the row stays empty.
        row.peak = row.steady = std::numeric_limits<double>::quiet_NaN();
      } catch (const SimulationDiverged&) {
        row.peak = row.steady = std::numeric_limits<double>::infinity();
        row.oscillating = true;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<VoltageSupportRow> voltage_support_sweep(const ParameterSet& base,
                                                     const std::vector<double>& x_over_r) {
  std::vector<VoltageSupportRow> rows;
  for (double xr : x_over_r) {
    struct Variant {
      const char* label;
      const char* kind;
      double rho;
    };
    const Variant variants[] = {{"constraint_aware", "constraint_aware", 0.0},
                                {"variable_vi_matched", "variable_vi", xr},
                                {"variable_vi_rho0", "variable_vi", 0.0}};
    for (const auto& v : variants) {
      ParameterSet p = base;
      p.set("grid.x_over_r", xr);
      p.set("controller.kind", v.kind);
      p.set("baseline.rho_xr", v.rho);
      p.set("baseline.k_vi", 0.0);
      VoltageSupportRow row;
      row.x_over_r = xr;
      row.controller = v.label;
      const RunResult r = run_scenario("voltage_support", p);
      row.current = r.metrics.steady_current;
      row.voltage = r.extras.at("steady_voltage");
      rows.push_back(row);
    }
  }
  return rows;
}

OverloadResult overload_margin(const ParameterSet& base, double resolution_mw) {
  if (!(resolution_mw > 0.0)) throw ConfigError("resolution must be > 0");
  OverloadResult out;
  const double resistive_mw =
      1e-3 * (base.number("twobus.load1_kw") + base.number("twobus.load2_kw"));

  auto survives = [&](double cpl_mw) {
    ParameterSet p = base;
    p.set("cpl.kw", 1e3 * cpl_mw);
    bool ok = true;
    try {
      const RunResult r = run_scenario("overload_trial", p);
      const double f = r.extras.at("final_frequency");
      ok = !r.metrics.lost_sync && r.extras.at("lost_sync_vsc2") == 0.0 &&
           r.extras.at("final_load_bus_voltage") > 0.7 && std::abs(f - 1.0) < 0.1;
    } catch (const SimulationDiverged&) {
      ok = false;
    } catch (const InfeasibleTrip&) {
      ok = false;
    }
    out.trials.emplace_back(cpl_mw, ok);
    return ok;
  };

  // Bracket, then bisect on the resolution grid.
  int lo = 0;
  int hi = 0;
  const int max_steps = static_cast<int>(std::ceil(4.0 / resolution_mw));
  if (!survives(0.0)) {
    out.max_total_load_mw = resistive_mw;
    return out;
  }
  int step = static_cast<int>(std::ceil(0.4 / resolution_mw));
  hi = step;
  while (hi <= max_steps && survives(hi * resolution_mw)) {
    lo = hi;
    hi += step;
  }
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (survives(mid * resolution_mw)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.max_total_load_mw = resistive_mw + lo * resolution_mw;
  return out;
}

}  // namespace gfm
