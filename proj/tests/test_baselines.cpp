#include <gtest/gtest.h>

#include <random>

#include "roundabout/baselines.hpp"
#include "roundabout/sequencing.hpp"

namespace roundabout {
namespace {

constexpr double kTd = 0.1;

CavRecord rec(int idx, int cz, int c, double x, double v = 15.0) {
  CavRecord r;
  r.idx = idx;
  r.uid = idx;
  r.state = {x, v};
  r.current_cz = cz;
  r.initial_cz = cz;
  r.final_cz = cz % 3 + 1;
  r.c = c;
  return r;
}

TEST(Ocbf, OnReferenceTracksExactly) {
  const Limits lim;
  const auto ref = solve_unconstrained(2.0, 12.0, 120.0, 8.0 / 9.0);
  for (double t : {2.0, 3.3, 5.0}) {
    const VehicleState s{ref.x(t), ref.v(t)};
    const auto r = ocbf_step(s, ref, t, std::nullopt, std::nullopt, 60.0, lim, {}, kTd);
    EXPECT_TRUE(r.feasible);
    EXPECT_NEAR(r.u, r.u_ref, 1e-9);
    EXPECT_NEAR(r.u_ref, ref.u(t + 0.5 * kTd), 1e-12);
  }
}

TEST(Ocbf, RearEndRowBinds) {
  const Limits lim;
  const auto ref = solve_unconstrained(0.0, 15.0, 120.0, 8.0 / 9.0);
  ASSERT_GT(ref.u(0.05), 0.0);
  // b3 = 0 with the leader at the same speed: the row forces u <= 0
  const VehicleState s{0.0, 15.0};
  const NeighborSample lead{1.8 * 15.0, 15.0, 0.0};
  const auto r = ocbf_step(s, ref, 0.0, lead, std::nullopt, 60.0, lim, {}, kTd);
  ASSERT_TRUE(r.feasible);
  EXPECT_LT(r.u, r.u_ref);
  EXPECT_NEAR(r.u, 0.0, 1e-9);  // tight: v_p - v - phi u + b3 = 0
}

TEST(Ocbf, InfeasibleBrakesHard) {
  const Limits lim;
  const auto ref = solve_unconstrained(0.0, 20.0, 120.0, 8.0 / 9.0);
  const NeighborSample lead{3.0, 10.0, 0.0};
  const auto r = ocbf_step({0.0, 20.0}, ref, 0.0, lead, std::nullopt, 60.0, lim, {}, kTd);
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.u, lim.u_min);
}

TEST(Ocbf, AfterReferenceEnds) {
  const Limits lim;
  const auto ref = solve_unconstrained(0.0, 15.0, 30.0, 8.0 / 9.0);
  const double t = ref.tf + 2.0;
  const auto r = ocbf_step({50.0, ref.v(ref.tf)}, ref, t, std::nullopt, std::nullopt, 60.0, lim,
                           {}, kTd);
  EXPECT_EQ(r.u_ref, 0.0);
  EXPECT_NEAR(r.v_ref, ref.v(ref.tf), 1e-12);
  EXPECT_NEAR(r.u, 0.0, 1e-9);
}

TEST(Ocbf, MergeRowOnlyBeforeMp) {
  const Limits lim;
  const auto ref = solve_unconstrained(0.0, 15.0, 120.0, 8.0 / 9.0);
  const NeighborSample im_before{50.0, 15.0, 0.0};
  const NeighborSample im_after{61.0, 15.0, 0.0};
  const VehicleState s{45.0, 15.0};
  const auto a = ocbf_step(s, ref, 0.0, std::nullopt, im_before, 60.0, lim, {}, kTd);
  const auto b = ocbf_step(s, ref, 0.0, std::nullopt, im_after, 60.0, lim, {}, kTd);
  EXPECT_LT(a.u, b.u);
  EXPECT_NEAR(b.u, b.u_ref, 1e-3);
}

TEST(Orders, FifoTableOne) {
  CoordinatorTables t(RoundaboutTopology(3, 60.0));
  t.insert(rec(0, 1, 0, 40.0));
  t.insert(rec(1, 1, 0, 20.0));
  t.insert(rec(4, 1, 1, 30.0));
  EXPECT_EQ(fifo_order(t, 1), (Sequence{0, 1, 4}));
  EXPECT_TRUE(fifo_order(t, 2).empty());
}

TEST(Orders, FifoAfterRenumber) {
  CoordinatorTables t(RoundaboutTopology(3, 60.0));
  t.insert(rec(1, 2, 0, 50.0));
  t.at(1).final_cz = 2;
  t.insert(rec(2, 1, 0, 40.0));
  t.insert(rec(3, 1, 1, 30.0));
  t.insert(rec(4, 1, 0, 10.0));
  std::vector<int> before;
  for (int i : fifo_order(t, 1)) before.push_back(t.at(i).uid);
  t.on_exit(1);
  std::vector<int> after;
  for (int i : fifo_order(t, 1)) after.push_back(t.at(i).uid);
  EXPECT_EQ(before, after);
  EXPECT_EQ(fifo_order(t, 1), (Sequence{1, 2, 3}));
}

TEST(Orders, FifoRespectsRoad) {
  // idx 1 entered first but is now behind idx 2 on the ring
  CoordinatorTables t(RoundaboutTopology(3, 60.0));
  t.insert(rec(1, 1, 0, 5.0));
  t.insert(rec(2, 1, 0, 40.0));
  t.insert(rec(3, 1, 1, 30.0));
  EXPECT_EQ(fifo_order(t, 1), (Sequence{2, 1, 3}));
}

TEST(Orders, SdfExamples) {
  CoordinatorTables t(RoundaboutTopology(3, 60.0));
  t.insert(rec(1, 1, 0, 10.0));
  t.insert(rec(2, 1, 1, 50.0));
  EXPECT_EQ(sdf_order(t, 1), (Sequence{2, 1}));

  CoordinatorTables u(RoundaboutTopology(3, 60.0));
  u.insert(rec(1, 1, 0, 30.0, 10.0));
  u.insert(rec(2, 1, 1, 30.0, 20.0));
  EXPECT_EQ(sdf_order(u, 1), (Sequence{2, 1}));
  EXPECT_EQ(sdf_order(u, 1, true), (Sequence{1, 2}));  // distance tie -> index
}

TEST(Orders, SdfKeepsRoadOrder) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> X(0.0, 60.0), V(5.0, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    CoordinatorTables t(RoundaboutTopology(3, 60.0));
    const int n = 1 + trial % 7;
    for (int i = 1; i <= n; ++i) t.insert(rec(i, 1, (i + trial) % 2, X(rng), V(rng)));
    const auto f0 = t.segment_order(1, 0), f1 = t.segment_order(1, 1);
    EXPECT_TRUE(preserves_road_order(sdf_order(t, 1), f0, f1));
    EXPECT_TRUE(preserves_road_order(sdf_order(t, 1, true), f0, f1));
    EXPECT_TRUE(preserves_road_order(fifo_order(t, 1), f0, f1));
  }
}

TEST(CarFollowing, FreeRoadAccelerates) {
  const Limits lim;
  const CarFollowingConfig c;
  VehicleState s{0.0, 10.0};
  for (int n = 0; n < 600; ++n) s = step(s, {car_following_step(s, std::nullopt, std::nullopt, lim, c, kTd)}, kTd);
  EXPECT_GT(s.v, 25.0);
  EXPECT_LE(s.v, lim.v_max + 1e-9);
}

TEST(CarFollowing, StoppedLeaderNoCollision) {
  const Limits lim;
  const CarFollowingConfig c;
  VehicleState s{0.0, 25.0};
  const double stopped_at = 120.0;
  double min_gap = 1e9;
  for (int n = 0; n < 1000; ++n) {
    const double gap = stopped_at - s.x;
    min_gap = std::min(min_gap, gap);
    s = step(s, {car_following_step(s, std::pair{gap, 0.0}, std::nullopt, lim, c, kTd)}, kTd);
    ASSERT_GE(s.v, -1e-12);
  }
  EXPECT_GT(min_gap, 0.0);
  EXPECT_LT(s.v, 0.1);
}

TEST(CarFollowing, YieldRule) {
  const Limits lim;
  const CarFollowingConfig c;
  EXPECT_TRUE(should_yield({10.0, 10.0}, 60.0, 2.0, lim, c));
  EXPECT_FALSE(should_yield({10.0, 10.0}, 60.0, 5.0, lim, c));
  EXPECT_FALSE(should_yield({55.0, 15.0}, 60.0, 2.0, lim, c));  // cannot stop any more
  // yielding vehicle decelerates towards the stop line
  const VehicleState s{30.0, 12.0};
  EXPECT_LT(car_following_step(s, std::nullopt, 30.0, lim, c, kTd),
            car_following_step(s, std::nullopt, std::nullopt, lim, c, kTd));
  EXPECT_LT(car_following_step(s, std::nullopt, 30.0, lim, c, kTd), 0.0);
}

}  // namespace
}  // namespace roundabout
