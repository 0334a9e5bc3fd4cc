#pragma once

// Reference computations used by the unit and acceptance tests. None of them
// call into the library code they are used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "gfm/constraints.hpp"
#include "gfm/frames.hpp"
#include "gfm/projection.hpp"

namespace gfm::oracle {

/// Ratings of the 208 V / 2 kW converter, filter inductance in pu * s.
inline ConverterRatings small_converter() {
  ConverterRatings r;
  const double omega_b = 2.0 * std::numbers::pi * 60.0;
  r.l_f = 0.075 / omega_b;
  r.r_f = 0.0076;
  r.c_f = 0.09 / omega_b;
  r.i_max = 1.2;
  r.i_max_shrt = 1.5;
  r.v_max = 1.178;
  r.v_dc = 2.0 * r.v_max;
  return r;
}

inline double nominal_omega() { return 2.0 * std::numbers::pi * 60.0; }

/// Filter current after `tau` by classical RK4 on
/// l di/dt = -r i - omega l J i + u in a frame rotating at omega.
template <Frame F>
Planar<F> rk4_predict(const Planar<F>& i0, const Planar<F>& u, double l, double r, double omega,
                      double tau, int steps) {
  auto f = [&](const Planar<F>& i) {
    const Planar<F> ji{-i.y, i.x};
    return (u - r * i - omega * l * ji) / l;
  };
  const double h = tau / steps;
  Planar<F> i = i0;
  for (int k = 0; k < steps; ++k) {
    const Planar<F> k1 = f(i);
    const Planar<F> k2 = f(i + 0.5 * h * k1);
    const Planar<F> k3 = f(i + 0.5 * h * k2);
    const Planar<F> k4 = f(i + h * k3);
    i += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return i;
}

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

inline bool inside(const Circle& c, double x, double y, double tol) {
  return std::hypot(x - c.cx, y - c.cy) <= c.r + tol;
}

/// Weighted Euclidean projection onto an intersection of three discs:
///   minimize w_x (x - px)^2 + w_y (y - py)^2 over the intersection.
///
/// Grid search over each boundary circle, golden-section polish around the
/// best sample, and every pairwise circle crossing as an extra candidate.
/// Returns nullopt when nothing feasible is found.
class QcqpOracle {
 public:
  explicit QcqpOracle(int samples = 4096, double tol = 1e-9) : samples_(samples), tol_(tol) {}

  std::optional<std::array<double, 2>> solve(const std::array<Circle, 3>& c, double px, double py,
                                             double w_x, double w_y) const {
    auto cost = [&](double x, double y) {
      return w_x * (x - px) * (x - px) + w_y * (y - py) * (y - py);
    };
    auto feasible = [&](double x, double y) {
      return std::all_of(c.begin(), c.end(), [&](const Circle& d) { return inside(d, x, y, tol_); });
    };
    if (feasible(px, py)) return std::array<double, 2>{px, py};

    double best = std::numeric_limits<double>::infinity();
    std::array<double, 2> arg{};
    auto consider = [&](double x, double y) {
      if (!feasible(x, y)) return;
      const double v = cost(x, y);
      if (v < best) {
        best = v;
        arg = {x, y};
      }
    };

    const double step = 2.0 * std::numbers::pi / samples_;
    for (const Circle& d : c) {
      auto point = [&](double phi) {
        return std::array<double, 2>{d.cx + d.r * std::cos(phi), d.cy + d.r * std::sin(phi)};
      };
      // Best sample on this circle, ignoring the other discs for the polish.
      int k_best = -1;
      double v_best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < samples_; ++k) {
        const auto p = point(k * step);
        if (!feasible(p[0], p[1])) continue;
        consider(p[0], p[1]);
        const double v = cost(p[0], p[1]);
        if (v < v_best) {
          v_best = v;
          k_best = k;
        }
      }
      if (k_best < 0) continue;
      // The unconstrained arc minimum near the best sample; kept only if it
      // is feasible, otherwise a crossing point below takes over.
      double a = (k_best - 2) * step;
      double b = (k_best + 2) * step;
      const double g = (std::sqrt(5.0) - 1.0) / 2.0;
      for (int it = 0; it < 200; ++it) {
        const double m1 = b - g * (b - a);
        const double m2 = a + g * (b - a);
        const auto p1 = point(m1);
        const auto p2 = point(m2);
        if (cost(p1[0], p1[1]) < cost(p2[0], p2[1])) {
          b = m2;
        } else {
          a = m1;
        }
      }
      const auto p = point(0.5 * (a + b));
      consider(p[0], p[1]);
    }

    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = i + 1; j < 3; ++j) {
        const double dx = c[j].cx - c[i].cx;
        const double dy = c[j].cy - c[i].cy;
        const double dist = std::hypot(dx, dy);
        if (dist == 0.0 || dist > c[i].r + c[j].r || dist < std::abs(c[i].r - c[j].r)) continue;
        const double along = (dist * dist + c[i].r * c[i].r - c[j].r * c[j].r) / (2.0 * dist);
        const double h = std::sqrt(std::max(0.0, c[i].r * c[i].r - along * along));
        const double ux = dx / dist;
        const double uy = dy / dist;
        const double mx = c[i].cx + along * ux;
        const double my = c[i].cy + along * uy;
        consider(mx - h * uy, my + h * ux);
        consider(mx + h * uy, my - h * ux);
      }
    }
    if (!std::isfinite(best)) return std::nullopt;
    return arg;
  }

 private:
  int samples_;
  double tol_;
};

inline std::array<Circle, 3> circles(const FeasibleSet& set) {
  std::array<Circle, 3> out;
  const auto d = set.discs();
  for (std::size_t n = 0; n < 3; ++n) out[n] = {d[n].center.x, d[n].center.y, d[n].radius};
  return out;
}

/// Does the intersection of three discs contain any point? Dense sampling of
/// every boundary plus the centers; used to cross-check the exact test.
inline bool sampled_nonempty(const std::array<Circle, 3>& c, int samples = 2048) {
  auto all = [&](double x, double y) {
    return std::all_of(c.begin(), c.end(), [&](const Circle& d) { return inside(d, x, y, 1e-12); });
  };
  for (const Circle& d : c) {
    if (all(d.cx, d.cy)) return true;
    for (int k = 0; k < samples; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / samples;
      if (all(d.cx + d.r * std::cos(phi), d.cy + d.r * std::sin(phi))) return true;
    }
  }
  return false;
}

/// A projection problem drawn from the operating envelope of the small converter.
struct RandomInstance {
  FeasibleSet set;
  double theta_hat = 0.0;
  double v_hat = 0.0;
  double w_theta = 0.0;
};

class InstanceGenerator {
 public:
  explicit InstanceGenerator(unsigned seed) : rng_(seed) {}

  /// Draws until the feasible set is nonempty (checked by sampling).
  RandomInstance next() {
    const ConverterRatings r = small_converter();
    const double omega = nominal_omega();
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (;;) {
      Measurements m;
      m.i_f = rotate(AlphaBeta{1.3 * r.i_max * unit(rng_), 0.0}, angle(rng_));
      m.v_f = rotate(AlphaBeta{1.15 * unit(rng_), 0.0}, angle(rng_));
      m.v_ad = rotate(AlphaBeta{0.05 * unit(rng_), 0.0}, angle(rng_));
      RandomInstance inst;
      inst.theta_hat = angle(rng_);
      inst.v_hat = 0.6 + 0.7 * unit(rng_);
      inst.w_theta = AdmmConfig::w_theta_from_pu(0.5, omega, 1e-4);
      inst.set = build_feasible_set(m, inst.theta_hat, omega, r, 1e-4, 20e-3);
      if (sampled_nonempty(circles(inst.set))) return inst;
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace gfm::oracle
