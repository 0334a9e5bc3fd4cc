#pragma once

// Reference frames, rotations and instantaneous power.
//
// Planar quantities carry their frame in the type: a stationary (alpha-beta)
// vector cannot be added to a rotating (dq) vector without an explicit
// transform. Every downstream equation is frame specific, so mixing them is a
// compile error rather than a runtime check.

#include <cmath>
#include <numbers>

namespace gfm {

enum class Frame { Stationary, Rotating };

template <Frame F>
struct Planar {
  double x = 0.0;
  double y = 0.0;

  constexpr Planar() = default;
  constexpr Planar(double x_, double y_) : x(x_), y(y_) {}

  constexpr Planar& operator+=(const Planar& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Planar& operator-=(const Planar& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Planar& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }

  friend constexpr Planar operator+(Planar a, const Planar& b) { return a += b; }
  friend constexpr Planar operator-(Planar a, const Planar& b) { return a -= b; }
  friend constexpr Planar operator-(const Planar& a) { return {-a.x, -a.y}; }
  friend constexpr Planar operator*(double s, Planar a) { return a *= s; }
  friend constexpr Planar operator*(Planar a, double s) { return a *= s; }
  friend constexpr Planar operator/(Planar a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(const Planar&, const Planar&) = default;

  [[nodiscard]] double norm() const { return std::hypot(x, y); }
  [[nodiscard]] constexpr double squared_norm() const { return x * x + y * y; }
  [[nodiscard]] bool is_finite() const { return std::isfinite(x) && std::isfinite(y); }
};

using AlphaBeta = Planar<Frame::Stationary>;
using Dq = Planar<Frame::Rotating>;

template <Frame F>
constexpr double dot(const Planar<F>& a, const Planar<F>& b) {
  return a.x * b.x + a.y * b.y;
}

struct ThreePhase {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Counter-clockwise rotation by `angle` (radians); stays in the same frame.
template <Frame F>
Planar<F> rotate(const Planar<F>& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// 90 degree rotation, i.e. R(pi/2) without trig round-off.
template <Frame F>
constexpr Planar<F> quarter_turn(const Planar<F>& v) {
  return {-v.y, v.x};
}

/// Amplitude-invariant Clarke transform.
AlphaBeta clarke(const ThreePhase& abc);

/// Inverse of the amplitude-invariant Clarke transform (zero-sequence free).
ThreePhase inverse_clarke(const AlphaBeta& ab);

/// Stationary to rotating frame at angle `theta_dq`: R(-theta_dq) * clarke(x).
Dq to_dq(const ThreePhase& abc, double theta_dq);
Dq to_dq(const AlphaBeta& ab, double theta_dq);

/// Rotating frame at angle `theta_dq` back to stationary.
AlphaBeta to_alpha_beta(const Dq& dq, double theta_dq);

struct PowerPair {
  double p = 0.0;
  double q = 0.0;
};

/// Instantaneous active and reactive power, P = 3/2 v'i and Q = 3/2 v'(j i).
///
/// With j = R(pi/2) this gives Q = 3/2 (v_beta i_alpha - v_alpha i_beta):
/// a current lagging the voltage exports positive Q.
template <Frame F>
PowerPair instantaneous_power(const Planar<F>& v, const Planar<F>& i) {
  return {1.5 * dot(v, i), 1.5 * dot(v, quarter_turn(i))};
}

/// Per-unit power on a base with S_base = 3/2 V_base I_base (peak quantities).
/// Equals instantaneous_power() / 1.5.
template <Frame F>
PowerPair per_unit_power(const Planar<F>& v, const Planar<F>& i) {
  return {dot(v, i), dot(v, quarter_turn(i))};
}

/// Wraps an angle to [-pi, pi).
double wrap_angle(double angle);

}  // namespace gfm
