#pragma once

// Time-varying set of admissible GFM voltages.
//
// The current limit is mapped onto the voltage reference through a one-step
// prediction of the filter current, assuming filter voltage and damping
// voltage stay constant over the horizon tau. Each horizon yields a disc in
// the voltage plane; together with the modulation disc they form the
// feasible set.
//
// Units are per unit with time in seconds: l_f is an inductance (pu * s, i.e.
// reactance / omega_base), r_f a resistance in pu.

#include <array>

#include <Eigen/Core>

#include "gfm/frames.hpp"

namespace gfm {

struct ConverterRatings {
  double l_f = 0.0;         ///< filter inductance used for prediction
  double r_f = 0.0;         ///< equivalent series resistance (filter + converter losses)
  double c_f = 0.0;         ///< filter capacitance, plant side only
  double i_max = 0.0;       ///< long-term current limit
  double i_max_shrt = 0.0;  ///< short-term limit, only used for reporting
  double v_max = 0.0;       ///< modulation limit, v_dc / 2
  double v_dc = 0.0;

  /// Throws ConfigError if any invariant is violated.
  void validate() const;
};

template <Frame F>
struct Disc {
  Planar<F> center;
  double radius = 0.0;

  [[nodiscard]] bool contains(const Planar<F>& v, double tol = 0.0) const {
    return (v - center).norm() <= radius + tol;
  }
};

/// Modulation disc, one-step current disc, one-cycle current disc (in that order).
template <Frame F>
using DiscTriple = std::array<Disc<F>, 3>;

struct FeasibleSet {
  Disc<Frame::Rotating> mod;
  Disc<Frame::Rotating> cur_step;
  Disc<Frame::Rotating> cur_cycle;
  double frame_angle = 0.0;  ///< angle of the dq frame the discs live in

  [[nodiscard]] DiscTriple<Frame::Rotating> discs() const { return {mod, cur_step, cur_cycle}; }
};

template <Frame F>
struct PredictionContext {
  Planar<F> i_f;
  Planar<F> v_f;
  Planar<F> v_ad;
  double omega_dq = 0.0;
  double tau = 0.0;
};

struct FilterMatrices {
  Eigen::Matrix2d a_tau;  ///< free response e^{-(r/l) tau} R(-omega tau)
  Eigen::Matrix2d b_tau;  ///< forced response Z^{-1} (I - A)
  Eigen::Matrix2d m_tau;  ///< (A^{-1} - I)^{-1} Z, maps current to disc-center offset
};

FilterMatrices discretized_filter_matrices(const ConverterRatings& ratings, double omega_dq,
                                           double tau);

template <Frame F>
Planar<F> apply(const Eigen::Matrix2d& m, const Planar<F>& v) {
  return {m(0, 0) * v.x + m(0, 1) * v.y, m(1, 0) * v.x + m(1, 1) * v.y};
}

/// Predicted filter current after ctx.tau when the GFM voltage v_gfm is held.
template <Frame F>
Planar<F> predict_current(const PredictionContext<F>& ctx, const Planar<F>& v_gfm,
                          const ConverterRatings& ratings) {
  const FilterMatrices m = discretized_filter_matrices(ratings, ctx.omega_dq, ctx.tau);
  return apply(m.a_tau, ctx.i_f) + apply(m.b_tau, v_gfm - ctx.v_ad - ctx.v_f);
}

/// Radius of the current disc for horizon tau. Throws NonFiniteRadius.
double current_disc_radius(const ConverterRatings& ratings, double omega_dq, double tau);

/// Precomputed current-disc geometry for a fixed (ratings, omega, tau).
class CurrentDiscModel {
 public:
  CurrentDiscModel() = default;
  CurrentDiscModel(const ConverterRatings& ratings, double omega_dq, double tau);

  template <Frame F>
  [[nodiscard]] Disc<F> disc(const Planar<F>& i_f, const Planar<F>& v_f,
                             const Planar<F>& v_ad) const {
    return {v_f + v_ad - apply(m_tau_, i_f), radius_};
  }

  [[nodiscard]] double radius() const { return radius_; }
  [[nodiscard]] const Eigen::Matrix2d& m_tau() const { return m_tau_; }

 private:
  Eigen::Matrix2d m_tau_ = Eigen::Matrix2d::Zero();
  double radius_ = 0.0;
};

/// Set of GFM voltages whose predicted current after ctx.tau stays within i_max.
template <Frame F>
Disc<F> current_disc(const PredictionContext<F>& ctx, const ConverterRatings& ratings) {
  return CurrentDiscModel(ratings, ctx.omega_dq, ctx.tau).disc(ctx.i_f, ctx.v_f, ctx.v_ad);
}

/// ||v_gfm - v_ad|| <= V_max, i.e. the modulation limit on v_sw = v_gfm - v_ad.
template <Frame F>
Disc<F> modulation_disc(const Planar<F>& v_ad, const ConverterRatings& ratings) {
  return {v_ad, ratings.v_max};
}

struct Measurements {
  AlphaBeta i_f;
  AlphaBeta v_f;
  AlphaBeta v_ad;
};

DiscTriple<Frame::Stationary> build_discs_alpha_beta(const Measurements& meas, double omega_dq,
                                                     const ConverterRatings& ratings,
                                                     double tau_ctr, double tau_cyc);

FeasibleSet build_feasible_set(const Measurements& meas, double theta_hat, double omega_dq,
                               const ConverterRatings& ratings, double tau_ctr, double tau_cyc);

/// Same as build_feasible_set but with precomputed current-disc models.
FeasibleSet build_feasible_set(const Measurements& meas, double theta_hat,
                               const ConverterRatings& ratings, const CurrentDiscModel& step,
                               const CurrentDiscModel& cycle);

/// Sufficient condition for a non-empty feasible set: the filter current is
/// within its limit and v_f + v_ad lies in the modulation disc. The disc is
/// centered at v_ad, so the second condition reads ||v_f|| <= V_max.
bool feasibility_precondition_holds(const Measurements& meas, const ConverterRatings& ratings);

/// Radii below this are treated as an empty set rather than a point.
inline constexpr double kMinDiscRadius = 1e-9;

/// Exact non-emptiness test for the intersection of three discs.
///
/// A non-empty intersection is either a whole disc (then that disc's center is
/// feasible) or has a vertex where two circles cross inside the third.
template <Frame F>
bool intersection_nonempty(const DiscTriple<F>& discs, double tol = 1e-9);

extern template bool intersection_nonempty(const DiscTriple<Frame::Stationary>&, double);
extern template bool intersection_nonempty(const DiscTriple<Frame::Rotating>&, double);

}  // namespace gfm
