#include "roundabout/unconstrained.hpp"

#include <gtest/gtest.h>

#include <random>

namespace roundabout {
namespace {

TEST(Unconstrained, ZeroBetaCruises) {
  const auto p = solve_unconstrained(0.0, 10.0, 60.0, 0.0);
  EXPECT_EQ(p.a, 0.0);
  EXPECT_EQ(p.b, 0.0);
  EXPECT_EQ(p.c, 10.0);
  EXPECT_EQ(p.d, 0.0);
  EXPECT_EQ(p.tf, 6.0);
}

TEST(Unconstrained, MatchesTwoVariableOracle) {
  // Frozen from an independent Newton solve of the position and
  // stationarity conditions in the unknowns (a, tf).
  constexpr double kA = -0.08819776762984094;
  constexpr double kTf = 5.508577774190766;
  const auto p = solve_unconstrained(0.0, 10.0, 60.0, 1.0);
  EXPECT_NEAR(p.a, kA, 1e-10);
  EXPECT_NEAR(p.tf, kTf, 1e-10);
  EXPECT_NEAR(p.b, -kA * kTf, 1e-10);
  EXPECT_LE(residuals(p, 10.0).max_abs(), 1e-10);
}

TEST(Unconstrained, EvalBoundaries) {
  const auto p = solve_unconstrained(2.0, 12.0, 120.0, 0.8);
  const auto start = eval(p, p.t0);
  EXPECT_NEAR(start.v, 12.0, 1e-10);
  EXPECT_NEAR(start.x, 0.0, 1e-10);
  EXPECT_NEAR(start.u, p.a * p.t0 + p.b, 1e-14);
  const auto end = eval(p, p.tf);
  EXPECT_NEAR(end.u, 0.0, 1e-10);
  EXPECT_NEAR(end.x, 120.0, 1e-8);
  EXPECT_THROW(eval(p, p.tf + 1.0), std::invalid_argument);
  EXPECT_THROW(eval(p, p.t0 - 1.0), std::invalid_argument);
}

TEST(Unconstrained, FiniteDifferenceConsistency) {
  const auto p = solve_unconstrained(0.0, 8.0, 90.0, 2.0);
  const double tm = 0.5 * (p.t0 + p.tf), h = 1e-5;
  const double dx = (p.x(tm + h) - p.x(tm - h)) / (2 * h);
  const double dv = (p.v(tm + h) - p.v(tm - h)) / (2 * h);
  EXPECT_NEAR(dx, p.v(tm), 1e-6);
  EXPECT_NEAR(dv, p.u(tm), 1e-6);
}

TEST(Unconstrained, RandomInstancesSatisfyConditions) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> V(2.0, 30.0), D(20.0, 240.0), B(0.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double v0 = V(rng), dist = D(rng), beta = B(rng);
    const auto p = solve_unconstrained(0.0, v0, dist, beta);
    EXPECT_LE(residuals(p, v0).max_abs(), 1e-8) << v0 << " " << dist << " " << beta;
    EXPECT_GT(p.tf, p.t0);
    // Control magnitude is largest at the start and decays linearly to zero.
    EXPECT_GE(std::abs(p.u(p.t0)), std::abs(p.u(0.5 * (p.t0 + p.tf))) - 1e-12);
    EXPECT_EQ(p.u(p.tf), p.a * p.tf + p.b);
  }
}

TEST(Unconstrained, PerturbedDurationIsNoBetter) {
  const double v0 = 11.0, dist = 150.0, beta = 8.0 / 9.0;
  const auto p = solve_unconstrained(0.0, v0, dist, beta);
  for (double scale : {0.99, 1.01}) {
    // Re-solve the boundary conditions with the duration held fixed.
    const double T = (p.tf - p.t0) * scale;
    const double a = 3.0 * (v0 * T - dist) / (T * T * T);
    const double cost = beta * T + a * a * T * T * T / 6.0;
    EXPECT_GE(cost, p.cost());
  }
}

TEST(Unconstrained, RejectsBadInput) {
  EXPECT_THROW(solve_unconstrained(0, 10, 0, 1), std::invalid_argument);
  EXPECT_THROW(solve_unconstrained(0, 0, 10, 0), std::invalid_argument);
  EXPECT_THROW(solve_unconstrained(0, 10, 10, -1), std::invalid_argument);
}

TEST(Unconstrained, ExtendedEvaluationHoldsFinalSpeed) {
  const auto p = solve_unconstrained(0.0, 10.0, 60.0, 1.0);
  const auto s = eval_extended(p, p.tf + 2.0);
  EXPECT_EQ(s.u, 0.0);
  EXPECT_NEAR(s.v, p.v(p.tf), 1e-12);
  EXPECT_NEAR(s.x, 60.0 + 2.0 * p.v(p.tf), 1e-9);
}

}  // namespace
}  // namespace roundabout
