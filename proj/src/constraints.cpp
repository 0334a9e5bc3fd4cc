#include "gfm/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/LU>

#include "gfm/errors.hpp"

namespace gfm {

namespace {

Eigen::Matrix2d scaled_rotation(double scale, double angle) {
  const double c = scale * std::cos(angle);
  const double s = scale * std::sin(angle);
  Eigen::Matrix2d m;
  m << c, -s, s, c;
  return m;
}

void require_prediction_inputs(const ConverterRatings& ratings, double tau) {
  if (!(ratings.r_f > 0.0)) throw ConfigError("filter resistance r_f must be > 0");
  if (!(ratings.l_f > 0.0)) throw ConfigError("filter inductance l_f must be > 0");
  if (!(tau > 0.0)) throw ConfigError("prediction horizon tau must be > 0");
}

}  // namespace

void ConverterRatings::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be > 0");
  };
  positive(l_f, "l_f");
  positive(r_f, "r_f");
  positive(c_f, "c_f");
  positive(i_max, "i_max");
  positive(i_max_shrt, "i_max_shrt");
  positive(v_max, "v_max");
  positive(v_dc, "v_dc");
  if (i_max_shrt < i_max) throw ConfigError("i_max_shrt must be >= i_max");
  if (std::abs(v_max - 0.5 * v_dc) > 1e-12) throw ConfigError("v_max must equal v_dc / 2");
}

FilterMatrices discretized_filter_matrices(const ConverterRatings& ratings, double omega_dq,
                                           double tau) {
  require_prediction_inputs(ratings, tau);
  const double decay = std::exp(-(ratings.r_f / ratings.l_f) * tau);

  FilterMatrices m;
  m.a_tau = scaled_rotation(decay, -omega_dq * tau);

  Eigen::Matrix2d z;
  z << ratings.r_f, -omega_dq * ratings.l_f, omega_dq * ratings.l_f, ratings.r_f;
  const Eigen::Matrix2d identity = Eigen::Matrix2d::Identity();
  m.b_tau = z.inverse() * (identity - m.a_tau);

  const Eigen::Matrix2d a_inv_minus_i = scaled_rotation(1.0 / decay, omega_dq * tau) - identity;
  if (std::abs(a_inv_minus_i.determinant()) < 1e-300) {
    throw NonFiniteRadius("A_tau^{-1} - I is singular");
  }
  m.m_tau = a_inv_minus_i.inverse() * z;
  return m;
}

double current_disc_radius(const ConverterRatings& ratings, double omega_dq, double tau) {
  require_prediction_inputs(ratings, tau);
  const double decay = std::exp(-(ratings.r_f / ratings.l_f) * tau);
  const double numerator =
      ratings.l_f * ratings.l_f * omega_dq * omega_dq + ratings.r_f * ratings.r_f;
  const double denominator = 1.0 + decay * decay - 2.0 * decay * std::cos(omega_dq * tau);
  if (denominator < 1e-30) {
    throw NonFiniteRadius("current disc radius denominator vanishes (r_f ~ 0, omega*tau ~ 2*pi*k)");
  }
  const double radius = ratings.i_max * std::sqrt(numerator / denominator);
  if (!std::isfinite(radius)) throw NonFiniteRadius("current disc radius is not finite");
  return radius;
}

CurrentDiscModel::CurrentDiscModel(const ConverterRatings& ratings, double omega_dq, double tau)
    : m_tau_(discretized_filter_matrices(ratings, omega_dq, tau).m_tau),
      radius_(current_disc_radius(ratings, omega_dq, tau)) {}

DiscTriple<Frame::Stationary> build_discs_alpha_beta(const Measurements& meas, double omega_dq,
                                                     const ConverterRatings& ratings,
                                                     double tau_ctr, double tau_cyc) {
  if (!(tau_cyc > tau_ctr && tau_ctr > 0.0)) {
    throw ConfigError("require tau_cyc > tau_ctr > 0");
  }
  const CurrentDiscModel step(ratings, omega_dq, tau_ctr);
  const CurrentDiscModel cycle(ratings, omega_dq, tau_cyc);
  return {modulation_disc(meas.v_ad, ratings), step.disc(meas.i_f, meas.v_f, meas.v_ad),
          cycle.disc(meas.i_f, meas.v_f, meas.v_ad)};
}

namespace {

Disc<Frame::Rotating> to_dq(const Disc<Frame::Stationary>& d, double theta) {
  return {gfm::to_dq(d.center, theta), d.radius};
}

}  // namespace

FeasibleSet build_feasible_set(const Measurements& meas, double theta_hat,
                               const ConverterRatings& ratings, const CurrentDiscModel& step,
                               const CurrentDiscModel& cycle) {
  FeasibleSet set;
  set.mod = to_dq(modulation_disc(meas.v_ad, ratings), theta_hat);
  set.cur_step = to_dq(step.disc(meas.i_f, meas.v_f, meas.v_ad), theta_hat);
  set.cur_cycle = to_dq(cycle.disc(meas.i_f, meas.v_f, meas.v_ad), theta_hat);
  set.frame_angle = theta_hat;
  return set;
}

FeasibleSet build_feasible_set(const Measurements& meas, double theta_hat, double omega_dq,
                               const ConverterRatings& ratings, double tau_ctr, double tau_cyc) {
  if (!(tau_cyc > tau_ctr && tau_ctr > 0.0)) {
    throw ConfigError("require tau_cyc > tau_ctr > 0");
  }
  return build_feasible_set(meas, theta_hat, ratings, CurrentDiscModel(ratings, omega_dq, tau_ctr),
                            CurrentDiscModel(ratings, omega_dq, tau_cyc));
}

bool feasibility_precondition_holds(const Measurements& meas, const ConverterRatings& ratings) {
  return meas.i_f.norm() <= ratings.i_max &&
         modulation_disc(meas.v_ad, ratings).contains(meas.v_f + meas.v_ad);
}

template <Frame F>
bool intersection_nonempty(const DiscTriple<F>& discs, double tol) {
  for (const auto& d : discs) {
    if (!(d.radius >= kMinDiscRadius)) return false;
  }
  auto in_all = [&](const Planar<F>& p, double slack = 0.0) {
    for (const auto& d : discs) {
      if (!d.contains(p, tol + slack)) return false;
    }
    return true;
  };
  for (const auto& d : discs) {
    if (in_all(d.center)) return true;
  }
  for (std::size_t i = 0; i < discs.size(); ++i) {
    for (std::size_t j = i + 1; j < discs.size(); ++j) {
      const Planar<F> delta = discs[j].center - discs[i].center;
      const double dist = delta.norm();
      const double ri = discs[i].radius;
      const double rj = discs[j].radius;
      if (dist > ri + rj + tol) return false;
      if (dist < std::abs(ri - rj) || dist == 0.0) continue;
      // Chord midpoint along the center line, then +/- half chord.
      const double along = (dist * dist + ri * ri - rj * rj) / (2.0 * dist);
      const double half_chord = std::sqrt(std::max(0.0, ri * ri - along * along));
      const Planar<F> unit = delta / dist;
      const Planar<F> mid = discs[i].center + along * unit;
      const Planar<F> normal = quarter_turn(unit);
      // Crossing points sit on two circles, so rounding must not reject them.
      const double slack = 1e-12 * std::max({1.0, ri, rj});
      if (in_all(mid + half_chord * normal, slack) || in_all(mid - half_chord * normal, slack)) {
        return true;
      }
    }
  }
  return false;
}

template bool intersection_nonempty(const DiscTriple<Frame::Stationary>&, double);
template bool intersection_nonempty(const DiscTriple<Frame::Rotating>&, double);

}  // namespace gfm
