#pragma once

// Discrete-time GFM droop control with constraint-aware projection, and the
// baseline current limiters it is compared against.
//
// Everything is per unit except time (seconds) and angular frequencies
// (rad/s). Droop gains are per unit: omega_dr = omega_0 (1 + m_p (P* - P_lp)).

#include "gfm/constraints.hpp"
#include "gfm/frames.hpp"
#include "gfm/projection.hpp"

namespace gfm {

struct DroopParams {
  double m_p = 0.03;
  double m_q = 0.03;
  double omega_0 = 0.0;  ///< rad/s
  double v_star = 1.0;
  double p_star = 0.0;
  double q_star = 0.0;
  double tau_v = 8e-3;
  double tau_lp = 5.3e-3;
  double tau_ctr = 1e-4;
  double tau_cyc = 20e-3;

  void validate() const;
};

struct DampingParams {
  double k_rc = 0.1;
  double omega_rc = 1e4;

  void validate() const;
};

struct ControllerState {
  double theta = 0.0;  ///< unwrapped
  double v = 1.0;
  double p_lp = 0.0;
  double q_lp = 0.0;
  AlphaBeta damp_state;
  double omega_out = 0.0;  ///< last applied frequency, rad/s
};

/// Sampled converter quantities in the stationary frame.
struct FilterMeasurement {
  AlphaBeta i_f;
  AlphaBeta v_f;
  AlphaBeta i_g;
};

struct DroopReference {
  double omega_dr = 0.0;
  double v_dr = 0.0;
};

DroopReference droop_references(double p_lp, double q_lp, const DroopParams& params);

/// A prev + (1 - A) input with A = exp(-tau_ctr / tau_lp).
double lowpass_update(double prev, double input, double tau_lp, double tau_ctr);

struct CandidateVoltage {
  double theta_hat = 0.0;
  double v_hat = 0.0;
};

CandidateVoltage candidate_voltage(const ControllerState& state, double omega_dr, double v_dr,
                                   const DroopParams& params);

struct DampingOutput {
  AlphaBeta v_ad;
  AlphaBeta state;
};

/// Per-axis Tustin realization of k_rc s / (s + omega_rc) in transposed
/// direct form: one state per axis, no prewarping.
DampingOutput rc_damping(const AlphaBeta& input, const AlphaBeta& state,
                         const DampingParams& params, double tau_ctr);

/// Input of the damping filter: the capacitor current i_f - i_g.
inline AlphaBeta damping_input(const FilterMeasurement& m) { return m.i_f - m.i_g; }

enum class ProjectionMethod { Admm, Polar };

/// What to do when the three discs do not intersect.
///   Hold: keep the previous magnitude and rotate at the droop frequency.
///   BestEffort: apply the ADMM output anyway (the polar path falls back to Hold).
enum class EmptySetPolicy { Hold, BestEffort };

struct ControllerDiagnostics {
  bool active = false;
  bool feasible = true;
  bool held = false;  ///< empty set: previous magnitude held
  double residual = 0.0;
  double omega = 0.0;  ///< rad/s
  double v = 0.0;
  double theta = 0.0;
  double p = 0.0;  ///< unfiltered per-unit power at the filter node
  double q = 0.0;
};

struct StepOutput {
  AlphaBeta v_sw;
  ControllerDiagnostics diag;
};

struct ConstraintAwareConfig {
  DroopParams droop;
  DampingParams damping;
  ConverterRatings model;  ///< the controller's view of the filter and limits
  ProjectionMethod method = ProjectionMethod::Admm;
  AdmmConfig admm;          ///< w_theta is overwritten from w_omega_pu
  double w_omega_pu = 0.5;
  int polar_samples = 3600;
  EmptySetPolicy empty_set = EmptySetPolicy::BestEffort;

  void validate() const;
  [[nodiscard]] double w_theta() const {
    return AdmmConfig::w_theta_from_pu(w_omega_pu, droop.omega_0, droop.tau_ctr);
  }
};

/// The projection problem a controller step would solve, without side effects.
struct ProjectionInstance {
  double theta_hat = 0.0;
  double v_hat = 0.0;
  double omega_dr = 0.0;
  FeasibleSet set;                         ///< rotating frame, omega_0 geometry
  DiscTriple<Frame::Stationary> discs_ab;  ///< stationary frame, omega_dr geometry
};

/// One control step of the constraint-aware droop controller.
///
/// The ADMM path builds the discs with omega_0 (precomputed geometry); the
/// polar path uses the droop frequency of the step. An empty feasible set is
/// handled per EmptySetPolicy and reported through diag.feasible; deciding
/// when to trip is left to the caller.
class ConstraintAwareController {
 public:
  explicit ConstraintAwareController(const ConstraintAwareConfig& cfg);

  StepOutput step(ControllerState& state, const FilterMeasurement& meas) const;

  /// The instance the next step() would project, leaving `state` untouched.
  [[nodiscard]] ProjectionInstance snapshot(const ControllerState& state,
                                            const FilterMeasurement& meas) const;

  void set_setpoint(double p_star, double q_star) {
    cfg_.droop.p_star = p_star;
    cfg_.droop.q_star = q_star;
  }
  [[nodiscard]] const ConstraintAwareConfig& config() const { return cfg_; }

 private:
  ConstraintAwareConfig cfg_;
  AdmmConfig admm_;
  CurrentDiscModel step_model_;
  CurrentDiscModel cycle_model_;
};

/// Plain droop: the candidate voltage without any limiter.
StepOutput unconstrained_droop_step(ControllerState& state, const FilterMeasurement& meas,
                                    const DroopParams& droop, const DampingParams& damping);

enum class BaselineVariant { ThresholdVI, VariableVI, CurrentRefLimit };

struct PiGains {
  double kp = 0.0;
  double ki = 0.0;  ///< per unit of time 1 / omega_base
};

struct BaselineParams {
  BaselineVariant variant = BaselineVariant::CurrentRefLimit;
  double k_vi = 0.0;               ///< 0 means "size for a bolted terminal fault"
  double i_thr = 1.0;
  double rho_xr = 5.0;             ///< steady-state X/R of the virtual impedance
  double rho_xr_transient = 0.8;
  double hpf_cutoff = 1000.0;      ///< rad/s
  double i_lim = 1.2;
  PiGains pi_current{1.0, 0.24};
  PiGains pi_voltage{0.55, 0.23};
  double k_ff_ig = 1.0;             ///< grid-current feedforward gain in the voltage loop
  double r_v = 0.0;                 ///< static virtual resistance on i_g (cascaded variants)
  double x_v = 0.0;                 ///< static virtual reactance on i_g (cascaded variants)

  void validate() const;
};

struct BaselineState {
  ControllerState droop;
  Dq xi_v;      ///< voltage-loop integrator
  Dq xi_c;      ///< current-loop integrator
  Dq i_lp;      ///< low-frequency part of the current for the variable impedance
};

/// Virtual-impedance gain that limits the steady bolted-terminal-fault current
/// to i_max, found by bisection on the steady-state balance
/// V* = k (i - i_thr) |1 + j rho| i.
double variable_vi_gain_for_bolted_fault(double v_star, double i_max, double i_thr,
                                         double rho_xr);

/// Baseline limiters on the same droop law. ThresholdVI modifies the switching
/// voltage directly; VariableVI and CurrentRefLimit sit on cascaded dq
/// voltage and current PI loops. All variants saturate v_sw at V_max.
class BaselineController {
 public:
  BaselineController(const BaselineParams& params, const DroopParams& droop,
                     const DampingParams& damping, const ConverterRatings& model,
                     double omega_base);

  StepOutput step(BaselineState& state, const FilterMeasurement& meas) const;

  void set_setpoint(double p_star, double q_star) {
    droop_.p_star = p_star;
    droop_.q_star = q_star;
  }
  [[nodiscard]] const BaselineParams& params() const { return params_; }

 private:
  BaselineParams params_;
  DroopParams droop_;
  DampingParams damping_;
  ConverterRatings model_;
  double omega_base_;
};

}  // namespace gfm
