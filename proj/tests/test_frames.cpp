#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gfm/frames.hpp"

using namespace gfm;

namespace {

constexpr double kPi = std::numbers::pi;

ThreePhase balanced(double amplitude, double phase) {
  return {amplitude * std::cos(phase), amplitude * std::cos(phase - 2.0 * kPi / 3.0),
          amplitude * std::cos(phase + 2.0 * kPi / 3.0)};
}

}  // namespace

TEST(Frames, ClarkeIsAmplitudeInvariant) {
  for (double phase : {0.0, 0.3, 1.7, -2.5}) {
    const AlphaBeta ab = clarke(balanced(1.7, phase));
    EXPECT_NEAR(ab.norm(), 1.7, 1e-12);
    EXPECT_NEAR(std::atan2(ab.y, ab.x), phase, 1e-12);
  }
}

TEST(Frames, InverseClarkeRoundTrip) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    const AlphaBeta ab{u(rng), u(rng)};
    const ThreePhase abc = inverse_clarke(ab);
    EXPECT_NEAR(abc.a + abc.b + abc.c, 0.0, 1e-12);
    const AlphaBeta back = clarke(abc);
    EXPECT_NEAR(back.x, ab.x, 1e-12);
    EXPECT_NEAR(back.y, ab.y, 1e-12);
  }
}

TEST(Frames, DqOfRotatingVectorIsConstant) {
  const double omega = 2.0 * kPi * 60.0;
  for (double t : {0.0, 1e-3, 7.3e-3, 0.1}) {
    const Dq dq = to_dq(balanced(1.0, omega * t + 0.2), omega * t);
    EXPECT_NEAR(dq.x, std::cos(0.2), 1e-12);
    EXPECT_NEAR(dq.y, std::sin(0.2), 1e-12);
  }
}

TEST(Frames, DqRoundTrip) {
  const AlphaBeta ab{0.4, -1.1};
  const AlphaBeta back = to_alpha_beta(to_dq(ab, 2.1), 2.1);
  EXPECT_NEAR(back.x, ab.x, 1e-14);
  EXPECT_NEAR(back.y, ab.y, 1e-14);
}

TEST(Frames, QuarterTurnMatchesRotation) {
  const AlphaBeta v{0.3, 0.8};
  const AlphaBeta a = quarter_turn(v);
  const AlphaBeta b = rotate(v, kPi / 2.0);
  EXPECT_NEAR(a.x, b.x, 1e-15);
  EXPECT_NEAR(a.y, b.y, 1e-15);
}

TEST(Frames, PowerSignConvention) {
  const AlphaBeta v{1.0, 0.0};
  // In phase: pure active power.
  PowerPair pq = per_unit_power(v, AlphaBeta{0.5, 0.0});
  EXPECT_DOUBLE_EQ(pq.p, 0.5);
  EXPECT_DOUBLE_EQ(pq.q, 0.0);
  // Lagging current (inductive load seen from the source) exports Q > 0.
  pq = per_unit_power(v, rotate(AlphaBeta{1.0, 0.0}, -kPi / 2.0));
  EXPECT_NEAR(pq.p, 0.0, 1e-15);
  EXPECT_NEAR(pq.q, 1.0, 1e-15);
  // Same numbers as Q = v_beta i_alpha - v_alpha i_beta.
  const AlphaBeta v2{0.3, 0.9};
  const AlphaBeta i2{-0.2, 0.7};
  EXPECT_NEAR(per_unit_power(v2, i2).q, v2.y * i2.x - v2.x * i2.y, 1e-15);
  EXPECT_NEAR(instantaneous_power(v2, i2).p, 1.5 * per_unit_power(v2, i2).p, 1e-15);
}

TEST(Frames, PowerIsFrameIndependent) {
  const AlphaBeta v{0.9, 0.2};
  const AlphaBeta i{0.1, -0.6};
  const PowerPair ab = per_unit_power(v, i);
  const PowerPair dq = per_unit_power(to_dq(v, 0.77), to_dq(i, 0.77));
  EXPECT_NEAR(ab.p, dq.p, 1e-14);
  EXPECT_NEAR(ab.q, dq.q, 1e-14);
}

TEST(Frames, WrapAngle) {
  EXPECT_NEAR(wrap_angle(0.0), 0.0, 1e-15);
  EXPECT_NEAR(wrap_angle(3.0 * kPi), -kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(-0.5), -0.5, 1e-15);
  EXPECT_NEAR(wrap_angle(2.0 * kPi + 0.25), 0.25, 1e-12);
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double w = wrap_angle(a);
    EXPECT_GE(w, -kPi);
    EXPECT_LT(w, kPi);
    EXPECT_NEAR(std::remainder(a - w, 2.0 * kPi), 0.0, 1e-12);
  }
}
