#include "roundabout/topology.hpp"

#include <gtest/gtest.h>

namespace roundabout {
namespace {

const RoundaboutTopology kTopo(3, 60.0);

TEST(Topology, RejectsBadConstruction) {
  EXPECT_THROW(RoundaboutTopology(1, 60.0), std::invalid_argument);
  EXPECT_THROW(RoundaboutTopology(3, 0.0), std::invalid_argument);
}

TEST(Topology, CzOffset) {
  EXPECT_EQ(kTopo.cz_offset(1, 1), 0);
  EXPECT_EQ(kTopo.cz_offset(1, 2), 1);
  EXPECT_EQ(kTopo.cz_offset(3, 1), 1);
  EXPECT_EQ(kTopo.cz_offset(2, 1), 2);
  EXPECT_THROW(kTopo.cz_offset(0, 1), std::invalid_argument);
  EXPECT_THROW(kTopo.cz_offset(1, 4), std::invalid_argument);
}

TEST(Topology, OffsetCycleProperties) {
  for (int n = 2; n <= 6; ++n) {
    const RoundaboutTopology t(n, 50.0);
    for (int k = 1; k <= n; ++k) {
      EXPECT_EQ(t.cz_offset(k, k), 0);
      EXPECT_EQ(t.cz_offset(k, t.next_cz(k)), 1);
    }
  }
}

TEST(Topology, AdjustedGap) {
  EXPECT_DOUBLE_EQ(kTopo.adjusted_gap(10, 40, 0), 30.0);
  EXPECT_DOUBLE_EQ(kTopo.adjusted_gap(50, 5, 1), 15.0);
  EXPECT_DOUBLE_EQ(kTopo.adjusted_gap(0, 0, 0), 0.0);
  EXPECT_THROW(kTopo.adjusted_gap(70, 5, 0), std::invalid_argument);
  EXPECT_THROW(kTopo.adjusted_gap(5, 5, -1), std::invalid_argument);
  // Same-segment swap flips the sign.
  EXPECT_DOUBLE_EQ(kTopo.adjusted_gap(10, 40, 0), -kTopo.adjusted_gap(40, 10, 0));
}

TEST(Topology, Routes) {
  EXPECT_EQ(kTopo.make_route(3, 1).zones, (std::vector<int>{3, 1}));
  EXPECT_EQ(kTopo.make_route(1, 2).zones, (std::vector<int>{1, 2}));
  EXPECT_EQ(kTopo.make_route(2, 2).zones, (std::vector<int>{2, 3, 1, 2}));
  EXPECT_DOUBLE_EQ(kTopo.make_route(1, 3).length(60.0), 180.0);
}

TEST(Topology, RouteShapeProperty) {
  for (int entry = 1; entry <= 3; ++entry) {
    for (int exit = 1; exit <= 3; ++exit) {
      const Route r = kTopo.make_route(entry, exit);
      ASSERT_GE(r.zones.size(), 2u);
      ASSERT_LE(r.zones.size(), 4u);
      EXPECT_EQ(r.zones.front(), entry);
      EXPECT_EQ(r.zones.back(), exit);
      for (std::size_t i = 1; i < r.zones.size(); ++i)
        EXPECT_EQ(r.zones[i], kTopo.next_cz(r.zones[i - 1]));
    }
  }
}

}  // namespace
}  // namespace roundabout
