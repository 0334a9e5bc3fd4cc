#include "gfm/frames.hpp"

namespace gfm {

namespace {
constexpr double kSqrt3Over2 = std::numbers::sqrt3 / 2.0;
}

AlphaBeta clarke(const ThreePhase& abc) {
  return {(2.0 / 3.0) * (abc.a - 0.5 * abc.b - 0.5 * abc.c),
          (2.0 / 3.0) * (kSqrt3Over2 * abc.b - kSqrt3Over2 * abc.c)};
}

ThreePhase inverse_clarke(const AlphaBeta& ab) {
  return {ab.x, -0.5 * ab.x + kSqrt3Over2 * ab.y, -0.5 * ab.x - kSqrt3Over2 * ab.y};
}

Dq to_dq(const AlphaBeta& ab, double theta_dq) {
  const AlphaBeta r = rotate(ab, -theta_dq);
  return {r.x, r.y};
}

Dq to_dq(const ThreePhase& abc, double theta_dq) { return to_dq(clarke(abc), theta_dq); }

AlphaBeta to_alpha_beta(const Dq& dq, double theta_dq) {
  const Dq r = rotate(dq, theta_dq);
  return {r.x, r.y};
}

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(angle + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  return w - std::numbers::pi;
}

}  // namespace gfm
