#pragma once

// Projection of a candidate GFM voltage onto the feasible set.
//
// admm_project is the real-time path: a fixed number of ADMM iterations on the
// weighted Cartesian QCQP in the candidate's dq frame, with one circular
// limiter per disc. polar_project_oracle solves the original problem in
// (angle, magnitude) coordinates by brute force and is meant for testing and
// benchmarking only.

#include "gfm/constraints.hpp"
#include "gfm/frames.hpp"

namespace gfm {

struct AdmmConfig {
  double rho = 5.0;
  int n_it = 5;
  double alpha = 1.6;     ///< over-relaxation, in [1, 2]
  double w_theta = 1.0;   ///< angle-deviation weight
  bool detect_empty = false;  ///< residual-based empty-set flag (needs n_it >= 50)

  void validate() const;

  /// w_theta from the per-unit frequency weight: w_omega_pu / (omega_0 * tau_ctr).
  static double w_theta_from_pu(double w_omega_pu, double omega_0, double tau_ctr) {
    return w_omega_pu / (omega_0 * tau_ctr);
  }
};

struct ProjectionResult {
  Dq v_dq;
  bool active = false;    ///< some circular limiter clipped during the iterations
  double residual = 0.0;  ///< max_n ||v - z_n|| at exit
  bool feasible = true;
};

/// Euclidean projection onto a disc (circular limiter about the disc center).
template <Frame F>
Planar<F> circular_project(const Planar<F>& xi, const Disc<F>& disc) {
  const Planar<F> offset = xi - disc.center;
  const double dist = offset.norm();
  if (dist <= disc.radius) return xi;
  return disc.center + (disc.radius / dist) * offset;
}

/// Runs exactly cfg.n_it ADMM iterations with z_n(0) = candidate, y_n(0) = 0.
/// Returns the primal iterate v, which may violate a disc by O(residual).
ProjectionResult admm_project(const Dq& candidate, const FeasibleSet& set, const AdmmConfig& cfg,
                              double v_hat);

struct PolarVoltage {
  double theta = 0.0;
  double magnitude = 0.0;
};

/// Minimizes w_theta (theta - theta_hat)^2 + (V - V_hat)^2 subject to
/// R(theta) (V, 0) lying in all three alpha-beta discs.
///
/// Angles are sampled densely over [theta_hat - pi, theta_hat + pi); along each
/// ray the admissible magnitudes form an interval, so V is solved in closed form.
/// The best sample is refined by shrinking-window resampling. Throws EmptySet
/// when no sampled ray meets the set.
PolarVoltage polar_project_oracle(double theta_hat, double v_hat,
                                  const DiscTriple<Frame::Stationary>& discs, double w_theta,
                                  int samples = 3600);

/// Angle and magnitude of the projected dq voltage expressed in the alpha-beta
/// frame: theta = theta_hat + atan2(v_q, v_d), V = ||v_dq||. Throws ZeroVector.
PolarVoltage recover_polar(const Dq& v_dq, double theta_hat);

}  // namespace gfm
