#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "roundabout/mpc.hpp"

namespace roundabout::testing {

// Two CAVs approaching one MP from different segments. i_m drives at
// constant speed and reaches the MP after t_m; the planned CAV starts with
// merging barrier b4_0 and speed v0.
struct MergeSetup {
  double b4_0 = -8.0;
  double t_m = 10.0;
  double v0 = 8.0;
  double v_im = 12.0;
  double L = 150.0;
};

struct MergeTrace {
  std::optional<ClbfParams> params;  // picked at t = 0
  std::vector<double> b4;            // per step, b4[0] = b4_0
  std::vector<double> u;
  bool all_feasible = true;
  int steps_to_mp = 0;               // index where i_m is at the MP
};

inline MpcConfig merge_config(const MergeSetup& m, int horizon = 20) {
  MpcConfig cfg;
  cfg.horizon = horizon;
  cfg.segment_length = m.L;
  return cfg;
}

inline MergeTrace run_merge(const MergeSetup& m, int horizon = 20) {
  const MpcConfig cfg = merge_config(m, horizon);
  const Limits& lim = cfg.limits;
  const double k = lim.phi / m.L;
  VehicleState im{m.L - m.t_m * m.v_im, m.v_im};
  VehicleState ego{im.x - k * im.x * m.v0 - lim.delta - m.b4_0, m.v0};

  MergeTrace out;
  out.steps_to_mp = static_cast<int>(std::lround(m.t_m / cfg.td));
  std::vector<double> nominal;
  for (int n = 0; n <= out.steps_to_mp; ++n) {
    out.b4.push_back(merge_barrier(ego.x, ego.v, im.x, m.L, lim));
    if (n == out.steps_to_mp) break;
    PlanRequest req;
    req.state = ego;
    req.merge = MergeContext{NeighborTrack::constant_velocity(im, cfg.horizon, cfg.td), false};
    req.nominal = nominal;
    req.held_params = out.params;
    const PlanResult plan = plan_cav(req, cfg);
    if (n == 0) out.params = plan.params;
    if (!plan.feasible) {
      out.all_feasible = false;
      break;
    }
    const auto r = receding_step(plan);
    nominal = r.nominal;
    out.u.push_back(r.applied);
    ego = step(ego, {r.applied}, cfg.td);
    im = step(im, {0.0}, cfg.td);
  }
  return out;
}

}  // namespace roundabout::testing
