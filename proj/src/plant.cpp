#include "gfm/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <type_traits>
#include <utility>

#include "gfm/errors.hpp"

namespace gfm {

double BaseValues::omega_base() const { return 2.0 * std::numbers::pi * f_base; }
double BaseValues::v_peak() const { return v_ll_rms * std::sqrt(2.0 / 3.0); }
double BaseValues::i_peak() const { return 2.0 * s_base / (3.0 * v_peak()); }
double BaseValues::z_base() const { return v_ll_rms * v_ll_rms / s_base; }

GridImpedance scr_to_grid_impedance(double scr, const BaseValues& base, double x_over_r) {
  if (!(scr > 0.0)) throw ConfigError("SCR must be > 0");
  if (!(x_over_r > 0.0)) throw ConfigError("grid X/R must be > 0");
  GridImpedance g;
  g.x_pu = 1.0 / scr;
  g.r_pu = g.x_pu / x_over_r;
  g.inductance_pu = g.x_pu / base.omega_base();
  g.inductance_h = g.x_pu * base.z_base() / base.omega_base();
  g.resistance_ohm = g.r_pu * base.z_base();
  return g;
}

double grid_inductance_to_scr(double inductance_h, const BaseValues& base) {
  if (!(inductance_h > 0.0)) throw ConfigError("grid inductance must be > 0");
  return base.z_base() / (base.omega_base() * inductance_h);
}

AlphaBeta constant_power_load_current(const AlphaBeta& v, double p_load, double v_cutoff) {
  const double mag = std::max(v.norm(), v_cutoff);
  return (2.0 / 3.0) * p_load / (mag * mag) * v;
}

double constant_power_load_conductance(double v_magnitude, double p_load_pu, double v_cutoff) {
  const double mag = std::max(v_magnitude, v_cutoff);
  return p_load_pu / (mag * mag);
}

namespace {

void check_filter(const FilterParams& f) {
  if (!(f.l_f > 0.0 && f.c_f > 0.0 && f.r_f >= 0.0)) {
    throw ConfigError("filter needs l_f > 0, c_f > 0, r_f >= 0");
  }
}

}  // namespace

Plant::Plant(const Topology& topology, double omega_base)
    : net_(NetworkSpec{}), omega_base_(omega_base) {
  if (!(omega_base > 0.0)) throw ConfigError("omega_base must be > 0");
  grid_.omega = omega_base;
  NetworkSpec spec;

  if (const auto* ib = std::get_if<InfiniteBus>(&topology)) {
    check_filter(ib->filter);
    if (!(ib->l_g > 0.0) || ib->r_g < 0.0) throw ConfigError("grid impedance must be positive");
    const int vsc = spec.add_source();
    grid_source_ = spec.add_source();
    const int cap = spec.add_node("cap", ib->filter.c_f);
    const int fb = spec.add_branch("filter", Terminal::source(vsc), Terminal::node(cap),
                                   ib->filter.l_f, ib->filter.r_f);
    const int gb = spec.add_branch("grid", Terminal::node(cap), Terminal::source(grid_source_),
                                   ib->l_g, ib->r_g, ib->breaker_closed);
    ports_.push_back({fb, cap, gb, vsc});
    breakers_.push_back({"s_vsc", true, gb});
  } else {
    const auto& tb = std::get<TwoBus>(topology);
    check_filter(tb.filter1);
    check_filter(tb.filter2);
    if (!(tb.l_t > 0.0 && tb.line_l > 0.0 && tb.line_c > 0.0 && tb.line_km > 0.0)) {
      throw ConfigError("two-bus network needs positive transformer and line parameters");
    }
    if (!(tb.r_load1 > 0.0 && tb.r_load2 > 0.0 && tb.r_fault > 0.0)) {
      throw ConfigError("two-bus loads and fault resistance must be > 0");
    }
    const int s1 = spec.add_source();
    const int s2 = spec.add_source();
    const int cap1 = spec.add_node("cap1", tb.filter1.c_f);
    const int cap2 = spec.add_node("cap2", tb.filter2.c_f);
    // Two parallel pi-lines: each bus carries half the shunt capacitance of both.
    const double bus_c = tb.line_c * tb.line_km;
    const int bus1 = spec.add_node("bus1", bus_c);
    const int bus2 = spec.add_node("bus2", bus_c);
    const int f1 = spec.add_branch("filter1", Terminal::source(s1), Terminal::node(cap1),
                                   tb.filter1.l_f, tb.filter1.r_f);
    const int f2 = spec.add_branch("filter2", Terminal::source(s2), Terminal::node(cap2),
                                   tb.filter2.l_f, tb.filter2.r_f);
    const int t1 = spec.add_branch("xfmr1", Terminal::node(cap1), Terminal::node(bus1), tb.l_t, tb.r_t);
    const int t2 = spec.add_branch("xfmr2", Terminal::node(cap2), Terminal::node(bus2), tb.l_t, tb.r_t,
                                   tb.vsc2_connected);
    for (const char* name : {"line_a", "line_b"}) {
      spec.add_branch(name, Terminal::node(bus1), Terminal::node(bus2), tb.line_l * tb.line_km,
                      tb.line_r * tb.line_km);
    }
    const int l1 = spec.add_shunt("load1", bus1, 1.0 / tb.r_load1, tb.load1_connected);
    const int l2 = spec.add_shunt("load2", bus2, 1.0 / tb.r_load2, tb.load2_connected);
    fault_shunt_ = spec.add_shunt("fault", bus2, 1.0 / tb.r_fault, false);
    ports_.push_back({f1, cap1, t1, s1});
    ports_.push_back({f2, cap2, t2, s2});
    breakers_.push_back({"s_vsc2", true, t2});
    breakers_.push_back({"s_l1", false, l1});
    breakers_.push_back({"s_l2", false, l2});
    breakers_.push_back({"s_fault", false, fault_shunt_});
    load_node_ = bus2;
    load_cutoff_ = tb.cpl_v_cutoff;
  }

  net_ = LinearNetwork(std::move(spec));
  v_sw_.assign(ports_.size(), AlphaBeta{});
  u_begin_ = LinearNetwork::Inputs::Zero(net_.source_count(), 2);
  u_end_ = u_begin_;
}

ConverterMeasurement Plant::measure(int converter) const {
  const Ports& p = ports_.at(converter);
  return {net_.branch_current(p.filter_branch), net_.node_voltage(p.cap_node),
          net_.branch_current(p.grid_branch)};
}

void Plant::set_switching_voltage(int converter, const AlphaBeta& v_sw) {
  if (!v_sw.is_finite()) throw SimulationDiverged("non-finite switching voltage", t_);
  v_sw_.at(converter) = v_sw;
}

void Plant::fill_inputs(LinearNetwork::Inputs& u, double phase) const {
  for (std::size_t k = 0; k < ports_.size(); ++k) {
    u(ports_[k].source, 0) = v_sw_[k].x;
    u(ports_[k].source, 1) = v_sw_[k].y;
  }
  if (grid_source_ >= 0) {
    u(grid_source_, 0) = grid_.magnitude * std::cos(phase);
    u(grid_source_, 1) = grid_.magnitude * std::sin(phase);
  }
}

void Plant::step(double tau_sim) {
  const double next_phase = grid_.phase + grid_.omega * tau_sim;
  fill_inputs(u_begin_, grid_.phase);
  fill_inputs(u_end_, next_phase);
  net_.step(u_begin_, u_end_, tau_sim);
  grid_.phase = next_phase;
  t_ += tau_sim;
}

void Plant::update_loads() {
  if (load_node_ < 0) return;
  const double g =
      constant_power_load_conductance(net_.node_voltage(load_node_).norm(), p_load_, load_cutoff_);
  net_.set_node_conductance(load_node_, g);
}

AlphaBeta Plant::load_bus_voltage() const {
  if (load_node_ < 0) return {};
  return net_.node_voltage(load_node_);
}

void Plant::check_finite() const {
  if (!net_.state().allFinite()) throw SimulationDiverged("plant state became non-finite", t_);
}

const Plant::Breaker& Plant::breaker(const std::string& id) const {
  for (const auto& b : breakers_) {
    if (b.id == id) return b;
  }
  throw ConfigError("unknown breaker '" + id + "'");
}

void Plant::close_breaker(const std::string& id) {
  const Breaker& b = breaker(id);
  if (b.is_branch) {
    net_.set_branch_closed(b.index, true);
  } else {
    net_.set_shunt_closed(b.index, true);
  }
  if (id == "s_fault") fault_active_ = true;
}

void Plant::open_breaker(const std::string& id) {
  const Breaker& b = breaker(id);
  if (b.is_branch) {
    net_.set_branch_closed(b.index, false);
  } else {
    net_.set_shunt_closed(b.index, false);
  }
  if (id == "s_fault") fault_active_ = false;
}

void Plant::apply_fault() {
  if (fault_active_) return;
  if (fault_shunt_ >= 0) {
    net_.set_shunt_closed(fault_shunt_, true);
  } else {
    prefault_magnitude_ = grid_.magnitude;
    grid_.magnitude = 0.0;
  }
  fault_active_ = true;
}

void Plant::clear_fault() {
  if (!fault_active_) return;
  if (fault_shunt_ >= 0) {
    net_.set_shunt_closed(fault_shunt_, false);
  } else {
    grid_.magnitude = prefault_magnitude_;
  }
  fault_active_ = false;
}

void Plant::initialize_steady_state(const std::vector<AlphaBeta>& v_sw, double omega) {
  if (v_sw.size() != ports_.size()) throw ConfigError("one switching voltage per converter expected");
  v_sw_ = v_sw;
  LinearNetwork::Inputs u = LinearNetwork::Inputs::Zero(net_.source_count(), 2);
  fill_inputs(u, grid_.phase);
  net_.set_state(net_.steady_state(u, omega));
}

EventSchedule::EventSchedule(std::vector<Event> events) : events_(std::move(events)) {
  for (const auto& e : events_) {
    if (!(e.time >= 0.0)) throw ConfigError("event times must be >= 0");
  }
  std::stable_sort(events_.begin(), events_.end(),
                   [](const Event& a, const Event& b) { return a.time < b.time; });
}

void EventSchedule::apply_due(double t, Plant& plant, std::vector<Setpoint>& setpoints) {
  // Half a nanosecond of slack absorbs accumulated round-off in t.
  constexpr double kSlack = 5e-10;
  while (next_ < events_.size() && events_[next_].time <= t + kSlack) {
    const Event& e = events_[next_++];
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Event::BreakerClose>) {
            plant.close_breaker(k.id);
          } else if constexpr (std::is_same_v<K, Event::BreakerOpen>) {
            plant.open_breaker(k.id);
          } else if constexpr (std::is_same_v<K, Event::GridVoltageSet>) {
            plant.grid().magnitude = k.magnitude;
            plant.grid().phase += k.phase_jump;
          } else if constexpr (std::is_same_v<K, Event::GridFrequencySet>) {
            plant.grid().omega = k.pu * plant.omega_base();
          } else if constexpr (std::is_same_v<K, Event::FaultApply>) {
            plant.apply_fault();
          } else if constexpr (std::is_same_v<K, Event::FaultClear>) {
            plant.clear_fault();
          } else if constexpr (std::is_same_v<K, Event::SetpointChange>) {
            for (int c = 0; c < static_cast<int>(setpoints.size()); ++c) {
              if (k.converter < 0 || k.converter == c) setpoints[c] = {k.p_star, k.q_star};
            }
          } else if constexpr (std::is_same_v<K, Event::LoadRamp>) {
            ramp_ = Ramp{e.time, k.t_end, k.p_start, k.p_end};
          }
        },
        e.kind);
  }
  if (ramp_) {
    const Ramp& r = *ramp_;
    double p = r.p_end;
    if (t < r.t_end && r.t_end > r.t_start) {
      p = r.p_start + (r.p_end - r.p_start) * (t - r.t_start) / (r.t_end - r.t_start);
    }
    plant.set_load_power(p);
  }
}

}  // namespace gfm
