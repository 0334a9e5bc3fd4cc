#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "gfm/controller.hpp"
#include "gfm/errors.hpp"
#include "gfm/plant.hpp"
#include "oracles.hpp"

using namespace gfm;

namespace {

DroopParams small_droop() {
  DroopParams d;
  d.omega_0 = oracle::nominal_omega();
  d.p_star = 0.5;
  return d;
}

ConstraintAwareConfig small_config() {
  ConstraintAwareConfig cfg;
  cfg.droop = small_droop();
  cfg.model = oracle::small_converter();
  return cfg;
}

/// Filter quantities of an unloaded converter at 1 pu, angle `theta`.
FilterMeasurement no_load(double theta) {
  FilterMeasurement m;
  m.v_f = to_alpha_beta(Dq{1.0, 0.0}, theta);
  return m;
}

}  // namespace

TEST(Droop, References) {
  DroopParams d = small_droop();
  d.q_star = 0.1;
  const DroopReference r = droop_references(0.2, 0.3, d);
  EXPECT_DOUBLE_EQ(r.omega_dr, d.omega_0 * (1.0 + 0.03 * 0.3));
  EXPECT_DOUBLE_EQ(r.v_dr, 1.0 + 0.03 * (0.1 - 0.3));
  // Zero power during a fault with P* = 0.5 gives the 1.015 pu reference.
  EXPECT_NEAR(droop_references(0.0, 0.0, small_droop()).omega_dr / d.omega_0, 1.015, 1e-15);
}

TEST(Droop, LowpassMatchesExponential) {
  double y = 0.0;
  const double tau_lp = 5.3e-3;
  const double tau = 1e-4;
  for (int k = 1; k <= 200; ++k) {
    y = lowpass_update(y, 1.0, tau_lp, tau);
    EXPECT_NEAR(y, 1.0 - std::exp(-k * tau / tau_lp), 1e-12);
  }
}

TEST(Droop, CandidateAdvancesAngleAndFiltersMagnitude) {
  const DroopParams d = small_droop();
  ControllerState s;
  s.theta = 0.5;
  s.v = 0.8;
  const CandidateVoltage c = candidate_voltage(s, 1.01 * d.omega_0, 1.0, d);
  EXPECT_DOUBLE_EQ(c.theta_hat, 0.5 + d.tau_ctr * 1.01 * d.omega_0);
  const double a = std::exp(-d.tau_ctr / d.tau_v);
  EXPECT_DOUBLE_EQ(c.v_hat, a * 0.8 + (1.0 - a));
}

TEST(Damping, HighPassBehaviour) {
  DampingParams p;
  AlphaBeta state;
  AlphaBeta out;
  for (int k = 0; k < 5000; ++k) {
    const DampingOutput o = rc_damping(AlphaBeta{1.0, -2.0}, state, p, 1e-4);
    state = o.state;
    out = o.v_ad;
  }
  EXPECT_NEAR(out.norm(), 0.0, 1e-12);
  // First sample of a step passes the high-frequency gain 2 k / (2 + w T).
  const DampingOutput first = rc_damping(AlphaBeta{1.0, 0.0}, AlphaBeta{}, p, 1e-4);
  EXPECT_NEAR(first.v_ad.x, 2.0 * p.k_rc / (2.0 + p.omega_rc * 1e-4), 1e-15);
  p.k_rc = 0.0;
  EXPECT_EQ(rc_damping(AlphaBeta{3.0, 1.0}, AlphaBeta{}, p, 1e-4).v_ad.norm(), 0.0);
}

TEST(Damping, TustinFrequencyResponse) {
  // Steady sinusoidal gain equals k s / (s + w_rc) at the warped frequency
  // s = j (2 / T) tan(w T / 2).
  const DampingParams p;
  const double T = 1e-4;
  for (double f : {50.0, 500.0, 1500.0}) {
    const double w = 2.0 * std::numbers::pi * f;
    AlphaBeta state;
    // Amplitude from the RMS over the second half, which spans whole periods.
    double sq = 0.0;
    const int n = 40000;
    for (int k = 0; k < n; ++k) {
      const double x = std::sin(w * k * T);
      const DampingOutput o = rc_damping(AlphaBeta{x, 0.0}, state, p, T);
      state = o.state;
      if (k >= n / 2) sq += o.v_ad.x * o.v_ad.x;
    }
    const double peak = std::sqrt(2.0 * sq / (n / 2));
    const std::complex<double> s(0.0, 2.0 / T * std::tan(w * T / 2.0));
    const double expected = std::abs(p.k_rc * s / (s + p.omega_rc));
    EXPECT_NEAR(peak, expected, 0.01 * expected) << f << " Hz";
  }
}

TEST(Damping, SignDampsFilterResonance) {
  // The damping input is the capacitor current. Subtracting the high-passed
  // capacitor current from v_sw behaves like a resistor in series with the
  // inverter, which must make the resonance decay faster.
  auto ripple = [](double k_rc) {
    const double omega_b = oracle::nominal_omega();
    InfiniteBus ib;
    ib.filter = {0.075 / omega_b, 0.0076, 0.09 / omega_b};
    ib.l_g = (1.0 / 7.5) / omega_b;
    ib.r_g = (1.0 / 7.5) / 3.0;
    Plant plant(ib, omega_b);
    plant.initialize_steady_state({AlphaBeta{1.0, 0.0}}, omega_b);
    DampingParams damping;
    damping.k_rc = k_rc;
    AlphaBeta state;
    std::vector<double> mag;
    for (int k = 0; k < 400; ++k) {
      const ConverterMeasurement m = plant.measure(0);
      const DampingOutput o = rc_damping(m.i_f - m.i_g, state, damping, 1e-4);
      state = o.state;
      plant.set_switching_voltage(0, rotate(AlphaBeta{1.1, 0.0}, omega_b * plant.time()) - o.v_ad);
      for (int s = 0; s < 100; ++s) plant.step(1e-6);
      mag.push_back(plant.measure(0).v_f.norm());
    }
    // Sample-to-sample variation of |v_f| between 5 ms and 40 ms after the step.
    double sum = 0.0;
    for (std::size_t k = 51; k < mag.size(); ++k) sum += std::abs(mag[k] - mag[k - 1]);
    return sum;
  };
  const double undamped = ripple(0.0);
  const double damped = ripple(0.1);
  const double inverted = ripple(-0.1);
  EXPECT_LT(damped, 0.5 * undamped);
  EXPECT_GT(inverted, undamped);
}

TEST(ConstraintAware, InactiveAtNoLoadMatchesPlainDroop) {
  const ConstraintAwareConfig cfg = small_config();
  const ConstraintAwareController ctrl(cfg);
  ControllerState a;
  ControllerState b;
  const FilterMeasurement m = no_load(0.0);
  const StepOutput oa = ctrl.step(a, m);
  const StepOutput ob = unconstrained_droop_step(b, m, cfg.droop, cfg.damping);
  EXPECT_FALSE(oa.diag.active);
  EXPECT_TRUE(oa.diag.feasible);
  EXPECT_NEAR(oa.v_sw.x, ob.v_sw.x, 1e-15);
  EXPECT_NEAR(oa.v_sw.y, ob.v_sw.y, 1e-15);
  EXPECT_EQ(a.theta, b.theta);
}

TEST(ConstraintAware, FaultStepLimitsPredictedCurrent) {
  // Bolted fault: filter voltage collapsed, current already at the limit and
  // in phase with the candidate. The plain candidate would overshoot.
  ConstraintAwareConfig cfg = small_config();
  cfg.admm.rho = 5.0;
  cfg.admm.n_it = 200;
  const ConstraintAwareController ctrl(cfg);
  ControllerState s;
  FilterMeasurement m;
  m.i_f = AlphaBeta{1.2, 0.0};
  m.v_f = AlphaBeta{0.05, 0.0};
  m.i_g = m.i_f;
  const StepOutput out = ctrl.step(s, m);
  EXPECT_TRUE(out.diag.active);
  EXPECT_TRUE(out.diag.feasible);
  // One-step prediction with the applied voltage stays within i_max.
  const ConverterRatings& r = cfg.model;
  PredictionContext<Frame::Stationary> ctx{m.i_f, m.v_f, {}, cfg.droop.omega_0, cfg.droop.tau_ctr};
  const AlphaBeta v_gfm = to_alpha_beta(Dq{s.v, 0.0}, s.theta);
  EXPECT_LE(predict_current(ctx, v_gfm, r).norm(), r.i_max * 1.01);
  ctx.tau = cfg.droop.tau_cyc;
  EXPECT_LE(predict_current(ctx, v_gfm, r).norm(), r.i_max * 1.01);
  EXPECT_LT(s.v, 0.5);
}

TEST(ConstraintAware, HoldPolicyOnEmptySet) {
  ConstraintAwareConfig cfg = small_config();
  cfg.empty_set = EmptySetPolicy::Hold;
  const ConstraintAwareController ctrl(cfg);
  ControllerState s;
  s.v = 0.9;
  FilterMeasurement m;
  // Filter voltage far beyond the modulation limit: no feasible voltage.
  m.v_f = AlphaBeta{1.6, 0.0};
  m.i_f = AlphaBeta{1.5, 0.0};
  const double theta0 = s.theta;
  const StepOutput out = ctrl.step(s, m);
  EXPECT_FALSE(out.diag.feasible);
  EXPECT_TRUE(out.diag.held);
  EXPECT_EQ(s.v, 0.9);
  const DroopReference ref = droop_references(s.p_lp, s.q_lp, cfg.droop);
  EXPECT_NEAR(s.theta - theta0, cfg.droop.tau_ctr * ref.omega_dr, 1e-12);
}

TEST(ConstraintAware, PolarPathStaysInsideDiscs) {
  ConstraintAwareConfig cfg = small_config();
  cfg.method = ProjectionMethod::Polar;
  const ConstraintAwareController ctrl(cfg);
  ControllerState s;
  FilterMeasurement m;
  m.i_f = AlphaBeta{1.2, 0.0};
  m.v_f = AlphaBeta{0.05, 0.0};
  m.i_g = m.i_f;
  const ProjectionInstance inst = ctrl.snapshot(s, m);
  const StepOutput out = ctrl.step(s, m);
  EXPECT_TRUE(out.diag.active);
  const AlphaBeta v = to_alpha_beta(Dq{s.v, 0.0}, s.theta);
  for (const auto& d : inst.discs_ab) EXPECT_TRUE(d.contains(v, 1e-9));
}

TEST(ConstraintAware, ConfigValidation) {
  ConstraintAwareConfig cfg = small_config();
  cfg.droop.tau_cyc = cfg.droop.tau_ctr;
  EXPECT_THROW(ConstraintAwareController{cfg}, ConfigError);
  cfg = small_config();
  cfg.model.v_dc = 3.0;
  EXPECT_THROW(ConstraintAwareController{cfg}, ConfigError);
  cfg = small_config();
  cfg.admm.rho = -1.0;
  EXPECT_THROW(ConstraintAwareController{cfg}, ConfigError);
}

TEST(Baseline, BoltedFaultGainSizing) {
  const double k = variable_vi_gain_for_bolted_fault(1.0, 1.2, 1.0, 5.0);
  // Balance V* = k (i - i_thr) |1 + j rho| i at i = i_max.
  EXPECT_NEAR(k * (1.2 - 1.0) * std::hypot(1.0, 5.0) * 1.2, 1.0, 1e-9);
  EXPECT_THROW(variable_vi_gain_for_bolted_fault(1.0, 1.0, 1.0, 5.0), ConfigError);
}

TEST(Baseline, CurrentReferenceLimitedAndSwitchingVoltageSaturated) {
  BaselineParams p;
  p.variant = BaselineVariant::CurrentRefLimit;
  const ConverterRatings r = oracle::small_converter();
  const BaselineController ctrl(p, small_droop(), DampingParams{}, r, oracle::nominal_omega());
  BaselineState s;
  FilterMeasurement m;
  // Collapsed terminal voltage with a large grid current: the feedforward alone
  // asks for more than i_lim, and the filter current never follows, so the
  // current loop drives the modulator into saturation as well.
  m.v_f = AlphaBeta{0.0, 0.0};
  m.i_f = AlphaBeta{0.0, 0.0};
  m.i_g = AlphaBeta{3.0, 0.0};
  for (int k = 0; k < 200; ++k) {
    const StepOutput out = ctrl.step(s, m);
    EXPECT_TRUE(out.diag.active);
    EXPECT_LE(out.v_sw.norm(), r.v_max * (1.0 + 1e-12));
  }
}

TEST(Baseline, ThresholdVirtualImpedanceInactiveBelowThreshold) {
  BaselineParams p;
  p.variant = BaselineVariant::ThresholdVI;
  const BaselineController ctrl(p, small_droop(), DampingParams{}, oracle::small_converter(),
                                oracle::nominal_omega());
  EXPECT_GT(ctrl.params().k_vi, 0.0);
  BaselineState s;
  FilterMeasurement m = no_load(0.0);
  m.i_f = AlphaBeta{0.5, 0.0};
  EXPECT_FALSE(ctrl.step(s, m).diag.active);
  m.i_f = AlphaBeta{1.1, 0.0};
  EXPECT_TRUE(ctrl.step(s, m).diag.active);
}
