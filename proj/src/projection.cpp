#include "gfm/projection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "gfm/errors.hpp"

namespace gfm {

void AdmmConfig::validate() const {
  if (!(rho > 0.0)) throw ConfigError("ADMM rho must be > 0");
  if (n_it < 1) throw ConfigError("ADMM n_it must be >= 1");
  if (!(alpha >= 1.0 && alpha <= 2.0)) throw ConfigError("ADMM alpha must lie in [1, 2]");
  if (!(w_theta > 0.0)) throw ConfigError("w_theta must be > 0");
}

ProjectionResult admm_project(const Dq& candidate, const FeasibleSet& set, const AdmmConfig& cfg,
                              double v_hat) {
  if (!(v_hat > 0.0)) throw ConfigError("admm_project needs V_hat > 0");
  const std::array<Disc<Frame::Rotating>, 3> discs = set.discs();

  // W = diag(1, w_theta / V_hat^2); W_rho = W + 3 rho I is diagonal too.
  const double w_d = 1.0;
  const double w_q = cfg.w_theta / (v_hat * v_hat);
  const double inv_d = 1.0 / (w_d + 3.0 * cfg.rho);
  const double inv_q = 1.0 / (w_q + 3.0 * cfg.rho);
  const Dq weighted_candidate{w_d * candidate.x, w_q * candidate.y};

  Dq v = candidate;
  std::array<Dq, 3> z{candidate, candidate, candidate};
  std::array<Dq, 3> y{};
  bool active = false;

  for (int it = 0; it < cfg.n_it; ++it) {
    Dq sum{};
    for (std::size_t n = 0; n < 3; ++n) sum += z[n] - y[n];
    const Dq v_next{inv_d * (weighted_candidate.x + cfg.rho * sum.x),
                    inv_q * (weighted_candidate.y + cfg.rho * sum.y)};
    const Dq v_relaxed = v_next + (cfg.alpha - 1.0) * (v_next - v);
    for (std::size_t n = 0; n < 3; ++n) {
      const Dq xi = v_relaxed + y[n];
      z[n] = circular_project(xi, discs[n]);
      if (!(z[n] == xi)) active = true;
      y[n] += v_relaxed - z[n];
    }
    v = v_next;
  }

  ProjectionResult result;
  result.active = active;
  // Without clipping every iterate equals the candidate up to round-off.
  result.v_dq = active ? v : candidate;
  for (const auto& zn : z) result.residual = std::max(result.residual, (result.v_dq - zn).norm());
  if (!active) result.residual = 0.0;
  if (cfg.detect_empty && cfg.n_it >= 50 && result.residual > 0.05 * set.mod.radius) {
    result.feasible = false;
  }
  return result;
}

namespace {

struct Interval {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

/// Magnitudes V >= 0 with V * (cos theta, sin theta) inside every disc.
std::optional<Interval> admissible_magnitudes(double theta,
                                              const DiscTriple<Frame::Stationary>& discs) {
  const AlphaBeta dir{std::cos(theta), std::sin(theta)};
  Interval out;
  for (const auto& d : discs) {
    const double b = dot(dir, d.center);
    const double k = d.center.squared_norm() - d.radius * d.radius;
    const double disc = b * b - k;
    if (disc < 0.0) return std::nullopt;
    const double root = std::sqrt(disc);
    out.lo = std::max(out.lo, b - root);
    out.hi = std::min(out.hi, b + root);
    if (out.lo > out.hi) return std::nullopt;
  }
  return out;
}

struct Candidate {
  double theta = 0.0;
  double magnitude = 0.0;
  double cost = std::numeric_limits<double>::infinity();
};

Candidate evaluate(double theta, double theta_hat, double v_hat, double w_theta,
                   const DiscTriple<Frame::Stationary>& discs) {
  const auto range = admissible_magnitudes(theta, discs);
  if (!range) return {theta, 0.0, std::numeric_limits<double>::infinity()};
  const double v = std::clamp(v_hat, range->lo, range->hi);
  const double dtheta = theta - theta_hat;
  return {theta, v, w_theta * dtheta * dtheta + (v - v_hat) * (v - v_hat)};
}

}  // namespace

PolarVoltage polar_project_oracle(double theta_hat, double v_hat,
                                  const DiscTriple<Frame::Stationary>& discs, double w_theta,
                                  int samples) {
  if (samples < 8) throw ConfigError("polar oracle needs at least 8 angle samples");
  // The candidate itself is the answer whenever it is feasible.
  const Candidate at_hat = evaluate(theta_hat, theta_hat, v_hat, w_theta, discs);
  if (at_hat.cost == 0.0) return {theta_hat, v_hat};

  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double step = two_pi / samples;
  Candidate best = at_hat;
  for (int k = 0; k < samples; ++k) {
    const Candidate c =
        evaluate(theta_hat - std::numbers::pi + k * step, theta_hat, v_hat, w_theta, discs);
    if (c.cost < best.cost) best = c;
  }
  if (!std::isfinite(best.cost)) throw EmptySet("polar oracle: no sampled ray meets the set");

  // Shrinking-window refinement around the incumbent.
  double half_width = step;
  for (int round = 0; round < 12; ++round) {
    const double center = best.theta;
    constexpr int kLocal = 40;
    for (int k = 0; k <= kLocal; ++k) {
      const double theta = center - half_width + (2.0 * half_width * k) / kLocal;
      const Candidate c = evaluate(theta, theta_hat, v_hat, w_theta, discs);
      if (c.cost < best.cost) best = c;
    }
    half_width *= 0.2;
  }
  return {best.theta, best.magnitude};
}

PolarVoltage recover_polar(const Dq& v_dq, double theta_hat) {
  const double magnitude = v_dq.norm();
  if (magnitude < 1e-12) throw ZeroVector("cannot recover the angle of a zero dq voltage");
  return {theta_hat + std::atan2(v_dq.y, v_dq.x), magnitude};
}

}  // namespace gfm
