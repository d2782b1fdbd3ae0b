#include "roundabout/qp.hpp"

#include <gtest/gtest.h>

#include <random>

#include "support/qp_oracle.hpp"

namespace roundabout::qp {
namespace {

QpProblem scalar(double p, double q) {
  QpProblem prob(1);
  prob.hessian(0, 0) = p;
  prob.linear[0] = q;
  return prob;
}

TEST(Qp, ActiveLowerRow) {
  QpProblem prob = scalar(1.0, 0.0);
  prob.add_row(Eigen::VectorXd::Ones(1), -1.0, "u>=1");
  const QpSolution s = solve(prob);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.u[0], 1.0, 1e-12);
  EXPECT_NEAR(s.multipliers[0], 1.0, 1e-12);
}

TEST(Qp, Unconstrained) {
  const QpSolution s = solve(scalar(1.0, -3.0));
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.u[0], 3.0, 1e-12);
}

TEST(Qp, BoxBoundActive) {
  QpProblem prob = scalar(1.0, -3.0);
  prob.upper[0] = 2.0;
  const QpSolution s = solve(prob);
  ASSERT_TRUE(s.ok());
  EXPECT_NEAR(s.u[0], 2.0, 1e-12);
  EXPECT_LT(kkt_residual(prob, s), 1e-10);
}

TEST(Qp, DimensionMismatchThrows) {
  QpProblem prob(2);
  prob.linear.resize(3);
  EXPECT_THROW(solve(prob), std::invalid_argument);
}

TEST(Qp, ContradictoryRowsAreInfeasible) {
  QpProblem prob = scalar(1.0, 0.0);
  prob.add_row(Eigen::VectorXd::Ones(1), -1.0);         // u >= 1
  prob.add_row(-Eigen::VectorXd::Ones(1), 0.0);         // u <= 0
  const QpSolution s = solve(prob);
  EXPECT_EQ(s.status, Status::Infeasible);
  EXPECT_FALSE(s.evidence.empty());
}

TEST(Qp, RowAgainstBoxInfeasible) {
  QpProblem prob(2);
  prob.hessian.setIdentity();
  prob.lower.setConstant(-1.0);
  prob.upper.setConstant(1.0);
  Eigen::VectorXd a(2);
  a << 1.0, 1.0;
  prob.add_row(a, -2.5);  // u0 + u1 >= 2.5 impossible inside the box
  EXPECT_EQ(solve(prob).status, Status::Infeasible);
}

TEST(Qp, SemidefiniteHessianHandled) {
  QpProblem prob(2);
  prob.hessian(0, 0) = 1.0;  // second variable has no curvature
  prob.linear << -1.0, 1.0;
  prob.lower << -5.0, -2.0;
  prob.upper << 5.0, 2.0;
  const QpSolution s = solve(prob);
  ASSERT_TRUE(s.ok());
  EXPECT_NEAR(s.u[0], 1.0, 1e-6);
  EXPECT_NEAR(s.u[1], -2.0, 1e-6);
}

QpProblem random_problem(std::mt19937_64& rng, int n, int rows) {
  std::normal_distribution<double> g(0.0, 1.0);
  QpProblem prob(n);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = g(rng);
  prob.hessian = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) prob.linear[i] = 3.0 * g(rng);
  prob.lower.setConstant(-2.0);
  prob.upper.setConstant(2.0);
  for (int r = 0; r < rows; ++r) {
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a[i] = g(rng);
    prob.add_row(a, 1.0 + 0.5 * g(rng));  // offset mostly positive: origin often feasible
  }
  return prob;
}

TEST(Qp, MatchesActiveSetEnumerationOnRandomProblems) {
  std::mt19937_64 rng(7);
  int optimal = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const QpProblem prob = random_problem(rng, 5, 8);
    const QpSolution s = solve(prob);
    const auto ref = testing::enumerate_active_sets(prob);
    if (!ref) {
      EXPECT_EQ(s.status, Status::Infeasible) << "trial " << trial;
      continue;
    }
    ASSERT_EQ(s.status, Status::Optimal) << "trial " << trial;
    ++optimal;
    EXPECT_LE(prob.max_violation(s.u), 1e-8);
    EXPECT_LE(kkt_residual(prob, s), 1e-6);
    EXPECT_LE((s.u - *ref).cwiseAbs().maxCoeff(), 1e-4) << "trial " << trial;
  }
  EXPECT_GT(optimal, 30);
}

TEST(Qp, MatchesGridSearchIn2d) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const QpProblem prob = random_problem(rng, 2, 3);
    const QpSolution s = solve(prob);
    const auto grid = testing::grid_search_2d(prob, 2e-3);
    if (!grid) continue;
    ASSERT_TRUE(s.ok());
    // Grid resolution bounds the achievable agreement in objective.
    EXPECT_LE(prob.objective(s.u), prob.objective(*grid) + 1e-9);
    EXPECT_LE((s.u - *grid).norm(), 2e-2);
  }
}

TEST(Qp, DroppingARowNeverRaisesTheOptimum) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    QpProblem prob = random_problem(rng, 4, 6);
    const QpSolution full = solve(prob);
    if (!full.ok()) continue;
    QpProblem fewer(4);
    fewer.hessian = prob.hessian;
    fewer.linear = prob.linear;
    fewer.lower = prob.lower;
    fewer.upper = prob.upper;
    for (int r = 1; r < prob.row_count(); ++r)
      fewer.add_row(prob.rows.row(r).transpose(), prob.offsets[r]);
    const QpSolution relaxed = solve(fewer);
    ASSERT_TRUE(relaxed.ok());
    EXPECT_LE(relaxed.objective, full.objective + 1e-9);
  }
}

TEST(Qp, Deterministic) {
  std::mt19937_64 rng(5);
  const QpProblem prob = random_problem(rng, 5, 8);
  const QpSolution a = solve(prob);
  const QpSolution b = solve(prob);
  EXPECT_EQ(a.status, b.status);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a.u[i], b.u[i]);
}

}  // namespace
}  // namespace roundabout::qp
