// Command-line front end: runs one or more scenarios and writes
// summary.json, trajectories.csv and optional SVG profiles.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "roundabout/io.hpp"
#include "roundabout/sim.hpp"

namespace fs = std::filesystem;
using namespace roundabout;

namespace {

std::vector<int> parse_horizons(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    int h = 0;
    try {
      h = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || h < 1) throw io::ConfigError("bad --horizon entry '" + item + "'");
    out.push_back(h);
  }
  if (out.empty()) throw io::ConfigError("--horizon is empty");
  return out;
}

struct Job {
  ScenarioConfig cfg;
  std::string name;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Roundabout CAV coordination simulator"};
  std::string config_path, controller, horizons, out_dir = "out";
  std::uint64_t seed = 0;
  double duration = -1.0;
  bool emit_plots = false, compare = false;
  std::vector<int> plot_ids;
  app.add_option("--config", config_path, "flat JSON scenario file");
  app.add_option("--controller", controller, "mpc-clbf | ocbf-fifo | ocbf-sdf | cf-baseline");
  app.add_option("--horizon", horizons, "horizon steps, comma list for a sweep (e.g. 10,20,30)");
  auto* seed_opt = app.add_option("--seed", seed, "arrival seed");
  app.add_option("--duration", duration, "simulated seconds");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_flag("--emit-plots", emit_plots, "write speed/control SVG profiles");
  app.add_option("--plot-cav", plot_ids, "CAV ids to plot (default: a few from the middle)");
  app.add_flag("--compare", compare, "run every controller on the same arrival trace");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  ScenarioConfig base;
  std::vector<int> hs;
  try {
    if (!config_path.empty()) base = io::load_config(config_path);
    if (!controller.empty()) {
      const auto c = parse_controller(controller);
      if (!c) throw io::ConfigError("unknown controller '" + controller + "'");
      base.controller = *c;
    }
    if (*seed_opt) base.seed = seed;
    if (duration >= 0.0) base.duration = duration;
    hs = horizons.empty() ? std::vector<int>{base.horizon} : parse_horizons(horizons);
    base.horizon = hs.front();
    base.validate();
  } catch (const io::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::vector<Job> jobs;
  const std::vector<Controller> controllers =
      compare ? std::vector<Controller>{Controller::MpcClbf, Controller::OcbfFifo,
                                        Controller::OcbfSdf, Controller::CfBaseline}
              : std::vector<Controller>{base.controller};
  for (Controller c : controllers) {
    // horizons only matter for the MPC controller
    const std::vector<int> hc = c == Controller::MpcClbf ? hs : std::vector<int>{hs.front()};
    for (int h : hc) {
      Job j{base, to_string(c)};
      j.cfg.controller = c;
      j.cfg.horizon = h;
      if (c == Controller::MpcClbf) j.name += "_H" + std::to_string(h);
      jobs.push_back(j);
    }
  }
  const bool nested = jobs.size() > 1;

  // one trace, shared by value
  const auto trace = generate_arrivals(base);

  try {
    fs::create_directories(out_dir);
    io::json index = io::json::array();
    std::vector<std::pair<std::string, std::vector<TrajectoryRow>>> all_rows;
    for (const auto& job : jobs) {
      std::fprintf(stderr, "running %s (H=%d, %.0f s)...\n", job.name.c_str(), job.cfg.horizon,
                   job.cfg.duration);
      const SimResult r = run(job.cfg, trace);
      const fs::path dir = nested ? fs::path(out_dir) / job.name : fs::path(out_dir);
      fs::create_directories(dir);
      const auto summary = io::summary_json(r.summary, job.cfg);
      io::write_text(dir / "summary.json", summary.dump(2) + "\n");
      io::write_trajectories(dir / "trajectories.csv", r.rows);
      const auto& t = r.summary.totals;
      std::printf("%-14s H=%-3d time=%9.1f energy=%9.1f objective=%9.1f infeasible=%d unsafe=%d\n",
                  job.name.c_str(), job.cfg.horizon, t.time, t.energy, t.objective,
                  r.summary.infeasible_count, r.summary.unsafe_count);
      index.push_back({{"run", job.name},
                       {"dir", dir.string()},
                       {"horizon", job.cfg.horizon},
                       {"objective", t.objective},
                       {"time", t.time},
                       {"energy", t.energy},
                       {"infeasible_count", r.summary.infeasible_count},
                       {"unsafe_count", r.summary.unsafe_count},
                       {"trace_hash", summary["trace_hash"]}});
      if (emit_plots) all_rows.emplace_back(job.name, r.rows);
    }
    if (nested) io::write_text(fs::path(out_dir) / "comparison.json", index.dump(2) + "\n");

    if (emit_plots && !all_rows.empty()) {
      std::vector<int> ids = plot_ids;
      if (ids.empty()) {
        // CAVs that finished in every run, from the middle of the trace
        std::vector<int> done;
        for (const auto& a : trace) done.push_back(a.uid);
        const std::size_t mid = done.size() / 2;
        for (std::size_t i = mid; i < done.size() && ids.size() < 3; ++i) ids.push_back(done[i]);
      }
      const fs::path pdir = fs::path(out_dir) / "plots";
      fs::create_directories(pdir);
      for (int id : ids) {
        std::vector<io::ProfileSeries> series;
        for (const auto& [name, rows] : all_rows) series.push_back(io::profile_of(rows, id, name));
        io::write_text(pdir / ("cav_" + std::to_string(id) + ".svg"),
                       io::profile_svg("vehicle " + std::to_string(id), series));
      }
    }
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
