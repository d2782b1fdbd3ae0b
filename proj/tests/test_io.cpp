#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "roundabout/io.hpp"

namespace roundabout {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("roundabout_io_" + name);
  fs::create_directories(p);
  return p;
}

TEST(Config, RoundTrip) {
  ScenarioConfig a;
  a.horizon = 30;
  a.controller = Controller::OcbfSdf;
  a.arrival_rates = {100.0, 200.0, 300.0};
  a.car_following.critical_gap = 2.5;
  ScenarioConfig b;
  io::apply_config(io::config_json(a), b);
  EXPECT_EQ(io::config_json(a), io::config_json(b));
  EXPECT_EQ(b.controller, Controller::OcbfSdf);
  EXPECT_EQ(b.horizon, 30);
}

TEST(Config, UnknownKeyRejected) {
  ScenarioConfig c;
  EXPECT_THROW(io::apply_config(io::json{{"horizn", 10}}, c), io::ConfigError);
  EXPECT_THROW(io::apply_config(io::json{{"horizon", "ten"}}, c), io::ConfigError);
  EXPECT_THROW(io::apply_config(io::json{{"controller", "mpc"}}, c), io::ConfigError);
  EXPECT_THROW(io::apply_config(io::json{{"alpha", 1.5}}, c), io::ConfigError);
  EXPECT_THROW(io::apply_config(io::json::array(), c), io::ConfigError);
  EXPECT_THROW(io::load_config("/nonexistent/config.json"), io::ConfigError);
}

TEST(Config, PartialOverlay) {
  ScenarioConfig c;
  io::apply_config(io::json{{"duration", 12.5}, {"seed", 42}}, c);
  EXPECT_EQ(c.duration, 12.5);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.horizon, ScenarioConfig{}.horizon);
}

TEST(Trajectories, EmptyRunHeaderOnly) {
  EXPECT_EQ(io::trajectories_csv({}), std::string(io::kTrajectoryHeader));
}

TEST(Trajectories, OneCavThreeSteps) {
  std::vector<TrajectoryRow> rows;
  for (int n = 0; n < 3; ++n) rows.push_back({n * 0.1, 5, 2, 1, 1.5 * n, 15.0, 0.25, 3});
  rows[1].unsafe = true;
  const auto dir = scratch("three");
  io::write_trajectories(dir / "t.csv", rows);
  const auto back = io::read_trajectories(dir / "t.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].unsafe, true);
  EXPECT_EQ(back[2].x, 3.0);
  EXPECT_EQ(back[0].sequence_id, 3);
}

TEST(Trajectories, SummaryRecomputedFromFile) {
  ScenarioConfig cfg;
  cfg.duration = 30.0;
  cfg.horizon = 10;
  const auto r = run(cfg);
  ASSERT_FALSE(r.rows.empty());
  const auto dir = scratch("roundtrip");
  io::write_trajectories(dir / "t.csv", r.rows);
  const auto back = io::read_trajectories(dir / "t.csv");
  ASSERT_EQ(back.size(), r.rows.size());
  const auto t = compute_totals(back, cfg.td, cfg.beta(), cfg.n_cz);
  EXPECT_NEAR(t.time, r.summary.totals.time, 1e-6);
  EXPECT_NEAR(t.energy, r.summary.totals.energy, 1e-6);
  EXPECT_NEAR(t.objective, r.summary.totals.objective, 1e-6);
  const auto j = io::summary_json(r.summary, cfg);
  EXPECT_NEAR(j["total"]["objective"].get<double>(), t.objective, 1e-6);
  EXPECT_EQ(j["per_cz"].size(), 3u);
}

TEST(Trajectories, SameTraceAcrossControllers) {
  ScenarioConfig cfg;
  cfg.duration = 20.0;
  const auto trace = generate_arrivals(cfg);
  std::set<std::uint64_t> hashes;
  for (Controller c : {Controller::MpcClbf, Controller::OcbfFifo, Controller::OcbfSdf,
                       Controller::CfBaseline}) {
    cfg.controller = c;
    hashes.insert(run(cfg, trace).summary.trace_hash);
  }
  EXPECT_EQ(hashes.size(), 1u);
}

TEST(Plots, SvgHasBothPanels) {
  std::vector<TrajectoryRow> rows;
  for (int n = 0; n < 20; ++n) rows.push_back({n * 0.1, 1, 1, 0, n * 1.0, 10.0 + 0.1 * n, 1.0});
  const auto svg = io::profile_svg("vehicle 1", {io::profile_of(rows, 1, "mpc-clbf")});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  std::size_t lines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1))
    ++lines;
  EXPECT_EQ(lines, 2u);
}

}  // namespace
}  // namespace roundabout
