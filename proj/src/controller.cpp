#include "gfm/controller.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gfm/errors.hpp"

namespace gfm {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be > 0");
}

Dq saturate(const Dq& v, double limit) {
  const double mag = v.norm();
  return mag > limit ? (limit / mag) * v : v;
}

/// Power filters and droop references shared by every controller variant.
DroopReference update_power_filters(ControllerState& state, const FilterMeasurement& meas,
                                    const DroopParams& droop, ControllerDiagnostics& diag) {
  const PowerPair pq = per_unit_power(meas.v_f, meas.i_f);
  diag.p = pq.p;
  diag.q = pq.q;
  state.p_lp = lowpass_update(state.p_lp, pq.p, droop.tau_lp, droop.tau_ctr);
  state.q_lp = lowpass_update(state.q_lp, pq.q, droop.tau_lp, droop.tau_ctr);
  return droop_references(state.p_lp, state.q_lp, droop);
}

void commit(ControllerState& state, double theta, double v, const DroopParams& droop,
            ControllerDiagnostics& diag) {
  state.omega_out = (theta - state.theta) / droop.tau_ctr;
  state.theta = theta;
  state.v = v;
  diag.omega = state.omega_out;
  diag.theta = theta;
  diag.v = v;
}

}  // namespace

void DroopParams::validate() const {
  require_positive(m_p, "m_p");
  require_positive(m_q, "m_q");
  require_positive(omega_0, "omega_0");
  require_positive(tau_v, "tau_v");
  require_positive(tau_lp, "tau_lp");
  require_positive(tau_ctr, "tau_ctr");
  require_positive(tau_cyc, "tau_cyc");
  if (!(v_star >= 0.0)) throw ConfigError("v_star must be >= 0");
  if (!(tau_cyc > tau_ctr)) throw ConfigError("tau_cyc must exceed tau_ctr");
}

void DampingParams::validate() const {
  if (!(k_rc >= 0.0)) throw ConfigError("k_rc must be >= 0");
  require_positive(omega_rc, "omega_rc");
}

DroopReference droop_references(double p_lp, double q_lp, const DroopParams& params) {
  return {params.omega_0 * (1.0 + params.m_p * (params.p_star - p_lp)),
          params.v_star + params.m_q * (params.q_star - q_lp)};
}

double lowpass_update(double prev, double input, double tau_lp, double tau_ctr) {
  const double a = std::exp(-tau_ctr / tau_lp);
  return a * prev + (1.0 - a) * input;
}

CandidateVoltage candidate_voltage(const ControllerState& state, double omega_dr, double v_dr,
                                   const DroopParams& params) {
  const double a = std::exp(-params.tau_ctr / params.tau_v);
  return {state.theta + params.tau_ctr * omega_dr, a * state.v + (1.0 - a) * v_dr};
}

DampingOutput rc_damping(const AlphaBeta& input, const AlphaBeta& state,
                         const DampingParams& params, double tau_ctr) {
  // Tustin: s -> (2/T)(z - 1)/(z + 1) gives H(z) = b (1 - z^-1) / (1 - a z^-1).
  const double wt = params.omega_rc * tau_ctr;
  const double a = (2.0 - wt) / (2.0 + wt);
  const double b = 2.0 * params.k_rc / (2.0 + wt);
  const AlphaBeta y = b * input + state;
  return {y, a * y - b * input};
}

void ConstraintAwareConfig::validate() const {
  droop.validate();
  damping.validate();
  model.validate();
  require_positive(w_omega_pu, "w_omega_pu");
  AdmmConfig probe = admm;
  probe.w_theta = w_theta();
  probe.validate();
  if (polar_samples < 8) throw ConfigError("polar_samples must be >= 8");
}

ConstraintAwareController::ConstraintAwareController(const ConstraintAwareConfig& cfg)
    : cfg_(cfg), admm_(cfg.admm) {
  cfg_.validate();
  admm_.w_theta = cfg_.w_theta();
  step_model_ = CurrentDiscModel(cfg_.model, cfg_.droop.omega_0, cfg_.droop.tau_ctr);
  cycle_model_ = CurrentDiscModel(cfg_.model, cfg_.droop.omega_0, cfg_.droop.tau_cyc);
}

StepOutput ConstraintAwareController::step(ControllerState& state,
                                           const FilterMeasurement& meas) const {
  const DroopParams& droop = cfg_.droop;
  StepOutput out;
  ControllerDiagnostics& diag = out.diag;

  const DroopReference ref = update_power_filters(state, meas, droop, diag);
  const CandidateVoltage cand = candidate_voltage(state, ref.omega_dr, ref.v_dr, droop);

  const DampingOutput damp = rc_damping(damping_input(meas), state.damp_state, cfg_.damping, droop.tau_ctr);
  state.damp_state = damp.state;
  const Measurements m{meas.i_f, meas.v_f, damp.v_ad};

  double theta = cand.theta_hat;
  double v = cand.v_hat;
  bool feasible = true;
  bool must_hold = false;

  if (cfg_.method == ProjectionMethod::Admm) {
    const FeasibleSet set =
        build_feasible_set(m, cand.theta_hat, cfg_.model, step_model_, cycle_model_);
    feasible = intersection_nonempty(set.discs());
    // Best effort: ADMM still returns a compromise between the discs when their
    // intersection is empty, which usually steers back toward feasibility.
    const bool run_admm = feasible || cfg_.empty_set == EmptySetPolicy::BestEffort;
    bool applied = false;
    if (run_admm) {
      const ProjectionResult res = admm_project(Dq{cand.v_hat, 0.0}, set, admm_, cand.v_hat);
      diag.active = res.active;
      diag.residual = res.residual;
      if (!res.active) {
        applied = true;
      } else if (res.v_dq.norm() >= 1e-12) {
        const PolarVoltage pv = recover_polar(res.v_dq, cand.theta_hat);
        theta = pv.theta;
        v = pv.magnitude;
        applied = true;
      }
    }
    if (!applied) feasible = false;
    must_hold = !applied;
  } else {
    const DiscTriple<Frame::Stationary> discs = build_discs_alpha_beta(
        m, ref.omega_dr, cfg_.model, droop.tau_ctr, droop.tau_cyc);
    feasible = intersection_nonempty(discs);
    if (feasible) {
      const AlphaBeta v_hat_ab = to_alpha_beta(Dq{cand.v_hat, 0.0}, cand.theta_hat);
      bool inside = true;
      for (const auto& d : discs) inside = inside && d.contains(v_hat_ab);
      if (!inside) {
        try {
          const PolarVoltage pv =
              polar_project_oracle(cand.theta_hat, cand.v_hat, discs, cfg_.w_theta(), cfg_.polar_samples);
          theta = pv.theta;
          v = pv.magnitude;
          diag.active = true;
        } catch (const EmptySet&) {
          feasible = false;
        }
      }
    }
    must_hold = !feasible;
  }

  if (must_hold) {
    // Hold the last magnitude and rotate at the droop frequency. The last
    // applied frequency is not used: a projection right before the set
    // empties can leave it far from nominal.
    theta = state.theta + droop.tau_ctr * ref.omega_dr;
    v = state.v;
    diag.held = true;
    diag.active = true;
  }
  diag.feasible = feasible;

  commit(state, theta, v, droop, diag);
  out.v_sw = to_alpha_beta(Dq{v, 0.0}, theta) - damp.v_ad;
  return out;
}

ProjectionInstance ConstraintAwareController::snapshot(const ControllerState& state,
                                                       const FilterMeasurement& meas) const {
  ControllerState probe = state;
  ControllerDiagnostics diag;
  const DroopParams& droop = cfg_.droop;
  const DroopReference ref = update_power_filters(probe, meas, droop, diag);
  const CandidateVoltage cand = candidate_voltage(probe, ref.omega_dr, ref.v_dr, droop);
  const DampingOutput damp =
      rc_damping(damping_input(meas), probe.damp_state, cfg_.damping, droop.tau_ctr);
  const Measurements m{meas.i_f, meas.v_f, damp.v_ad};
  ProjectionInstance inst;
  inst.theta_hat = cand.theta_hat;
  inst.v_hat = cand.v_hat;
  inst.omega_dr = ref.omega_dr;
  inst.set = build_feasible_set(m, cand.theta_hat, cfg_.model, step_model_, cycle_model_);
  inst.discs_ab = build_discs_alpha_beta(m, ref.omega_dr, cfg_.model, droop.tau_ctr, droop.tau_cyc);
  return inst;
}

StepOutput unconstrained_droop_step(ControllerState& state, const FilterMeasurement& meas,
                                    const DroopParams& droop, const DampingParams& damping) {
  StepOutput out;
  const DroopReference ref = update_power_filters(state, meas, droop, out.diag);
  const CandidateVoltage cand = candidate_voltage(state, ref.omega_dr, ref.v_dr, droop);
  const DampingOutput damp = rc_damping(damping_input(meas), state.damp_state, damping, droop.tau_ctr);
  state.damp_state = damp.state;
  commit(state, cand.theta_hat, cand.v_hat, droop, out.diag);
  out.v_sw = to_alpha_beta(Dq{cand.v_hat, 0.0}, cand.theta_hat) - damp.v_ad;
  return out;
}

void BaselineParams::validate() const {
  if (k_vi < 0.0) throw ConfigError("k_vi must be >= 0");
  if (rho_xr < 0.0 || rho_xr_transient < 0.0) throw ConfigError("X/R ratios must be >= 0");
  require_positive(hpf_cutoff, "hpf_cutoff");
  require_positive(i_lim, "i_lim");
  if (variant == BaselineVariant::ThresholdVI && !(i_thr < i_lim)) {
    throw ConfigError("threshold virtual impedance needs i_thr < i_lim");
  }
  if (variant == BaselineVariant::ThresholdVI && !(k_vi > 0.0)) {
    throw ConfigError("threshold virtual impedance needs k_vi > 0");
  }
}

double variable_vi_gain_for_bolted_fault(double v_star, double i_max, double i_thr,
                                         double rho_xr) {
  if (!(i_max > i_thr)) throw ConfigError("bolted-fault sizing needs i_max > i_thr");
  const double z_unit = std::hypot(1.0, rho_xr);
  // Steady fault current for a gain k solves k z (i - i_thr) i = V*.
  auto fault_current = [&](double k) {
    const double c = v_star / (k * z_unit);
    return 0.5 * (i_thr + std::sqrt(i_thr * i_thr + 4.0 * c));
  };
  double lo = 1e-6;
  double hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (fault_current(mid) > i_max) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

BaselineController::BaselineController(const BaselineParams& params, const DroopParams& droop,
                                       const DampingParams& damping, const ConverterRatings& model,
                                       double omega_base)
    : params_(params), droop_(droop), damping_(damping), model_(model), omega_base_(omega_base) {
  droop_.validate();
  damping_.validate();
  require_positive(omega_base_, "omega_base");
  require_positive(model_.l_f, "l_f");
  require_positive(model_.c_f, "c_f");
  require_positive(model_.v_max, "v_max");
  if (params_.variant != BaselineVariant::CurrentRefLimit && params_.k_vi == 0.0) {
    params_.k_vi = variable_vi_gain_for_bolted_fault(droop_.v_star, params_.i_lim, params_.i_thr,
                                                     params_.rho_xr);
  }
  params_.validate();
}

StepOutput BaselineController::step(BaselineState& state, const FilterMeasurement& meas) const {
  StepOutput out;
  ControllerDiagnostics& diag = out.diag;
  ControllerState& droop_state = state.droop;
  const double tau = droop_.tau_ctr;

  const DroopReference ref = update_power_filters(droop_state, meas, droop_, diag);
  const CandidateVoltage cand = candidate_voltage(droop_state, ref.omega_dr, ref.v_dr, droop_);
  commit(droop_state, cand.theta_hat, cand.v_hat, droop_, diag);
  const double theta = cand.theta_hat;
  const double omega = ref.omega_dr;

  const Dq i_f = to_dq(meas.i_f, theta);
  const Dq v_f = to_dq(meas.v_f, theta);
  const Dq i_g = to_dq(meas.i_g, theta);
  const Dq v_gfm{cand.v_hat, 0.0};

  if (params_.variant == BaselineVariant::ThresholdVI) {
    const double excess = std::max(0.0, i_f.norm() - params_.i_thr);
    const Dq drop = params_.k_vi * excess * (i_f + params_.rho_xr * quarter_turn(i_f));
    diag.active = excess > 0.0;
    const DampingOutput damp = rc_damping(damping_input(meas), droop_state.damp_state, damping_, tau);
    droop_state.damp_state = damp.state;
    const Dq v_sw = saturate(v_gfm - drop - to_dq(damp.v_ad, theta), model_.v_max);
    out.v_sw = to_alpha_beta(v_sw, theta);
    return out;
  }

  // Static output impedance of the cascaded loops.
  Dq v_ref = v_gfm - (params_.r_v * i_g + params_.x_v * quarter_turn(i_g));
  if (params_.variant == BaselineVariant::VariableVI) {
    const double a = std::exp(-params_.hpf_cutoff * tau);
    state.i_lp = a * state.i_lp + (1.0 - a) * i_f;
    const Dq i_hp = i_f - state.i_lp;
    const double excess = std::max(0.0, i_f.norm() - params_.i_thr);
    const Dq z_ss = state.i_lp + params_.rho_xr * quarter_turn(state.i_lp);
    const Dq z_tr = i_hp + params_.rho_xr_transient * quarter_turn(i_hp);
    v_ref = v_ref - params_.k_vi * excess * (z_ss + z_tr);
    diag.active = excess > 0.0;
  }

  // Voltage loop with capacitor and grid-current feedforward.
  const double ki_v = params_.pi_voltage.ki * omega_base_ * tau;
  const double ki_c = params_.pi_current.ki * omega_base_ * tau;
  const Dq e_v = v_ref - v_f;
  const Dq i_unlim = params_.k_ff_ig * i_g + omega * model_.c_f * quarter_turn(v_f) +
                     params_.pi_voltage.kp * e_v + state.xi_v;
  Dq i_ref = i_unlim;
  bool limited = false;
  if (params_.variant == BaselineVariant::CurrentRefLimit && i_unlim.norm() > params_.i_lim) {
    i_ref = saturate(i_unlim, params_.i_lim);
    limited = true;
    diag.active = true;
  }

  // Current loop with filter-voltage and cross-coupling feedforward.
  const Dq e_c = i_ref - i_f;
  const Dq v_unlim =
      v_f + omega * model_.l_f * quarter_turn(i_f) + params_.pi_current.kp * e_c + state.xi_c;
  const Dq v_sw = saturate(v_unlim, model_.v_max);
  const bool saturated = !(v_sw == v_unlim);

  // Conditional integration: while a limiter or the modulator is saturated,
  // only integrate in directions that pull the unlimited output back.
  if ((!limited && !saturated) || dot(i_unlim, e_v) < 0.0) state.xi_v += ki_v * e_v;
  if (!saturated || dot(v_unlim, e_c) < 0.0) state.xi_c += ki_c * e_c;

  out.v_sw = to_alpha_beta(v_sw, theta);
  return out;
}

}  // namespace gfm
