#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "roundabout/coordinator.hpp"
#include "roundabout/dynamics.hpp"
#include "roundabout/qp.hpp"
#include "roundabout/safety.hpp"
#include "roundabout/unconstrained.hpp"

namespace roundabout {

// ---------------------------------------------------------------- OCBF

struct OcbfConfig {
  double w_speed = 1.0;  // weight on speed deviation (control weight is 1)
  ClassKConfig gammas;
  // The classic controller imposes the continuous-time CBF rows; the
  // sampled-data correction is available for comparison.
  bool sampled_data = false;

  void validate() const {
    if (!(w_speed > 0.0)) throw std::invalid_argument("ocbf: weight must be > 0");
    gammas.validate();
  }
};

struct OcbfResult {
  double u = 0.0;
  bool feasible = true;
  double u_ref = 0.0;
  double v_ref = 0.0;
};

// One-step tracking QP. Leader and merge partner are in the CAV's frame;
// merge rows apply only while the partner is short of the MP.
inline OcbfResult ocbf_step(VehicleState s0, const PolyTrajectory& reference, double t,
                            const std::optional<NeighborSample>& leader,
                            const std::optional<NeighborSample>& merge, double segment_length,
                            const Limits& lim, const OcbfConfig& cfg, double td) {
  // mean reference control over the step, so an on-reference state is
  // reproduced exactly
  const auto ref_mid = eval_extended(reference, std::max(t + 0.5 * td, reference.t0));
  const auto ref_next = eval_extended(reference, std::max(t + td, reference.t0));
  OcbfResult out;
  out.u_ref = ref_mid.u;
  out.v_ref = ref_next.v;

  // (u - u_ref)^2 + w (v + u td - v_ref)^2, halved
  qp::QpProblem p(1);
  p.hessian(0, 0) = 1.0 + cfg.w_speed * td * td;
  p.linear[0] = -out.u_ref - cfg.w_speed * td * (out.v_ref - s0.v);
  p.lower[0] = lim.u_min;
  p.upper[0] = lim.u_max;
  const double sample = cfg.sampled_data ? td : 0.0;
  const auto s = lifted_states(s0, 1, td);
  auto build = [&](bool lower_speed_row) {
    qp::QpProblem p(1);
    p.hessian(0, 0) = 1.0 + cfg.w_speed * td * td;
    p.linear[0] = -out.u_ref - cfg.w_speed * td * (out.v_ref - s0.v);
    p.lower[0] = lim.u_min;
    p.upper[0] = lim.u_max;
    auto [hi, lo] = row_vlimits(s[0], 0, lim, cfg.gammas, sample);
    p.add_row(hi.coef, hi.offset, hi.tag);
    if (lower_speed_row) p.add_row(lo.coef, lo.offset, lo.tag);
    if (leader) {
      const auto r = row_rear_end(s[0], *leader, 0, lim, cfg.gammas.gamma_rear, sample);
      p.add_row(r.coef, r.offset, r.tag);
    }
    if (merge && merge->x < segment_length) {
      const auto r =
          row_merge_cbf(s[0], *merge, 0, lim, segment_length, cfg.gammas.gamma_merge, sample);
      p.add_row(r.coef, r.offset, r.tag);
    }
    return p;
  };
  auto sol = qp::solve(build(true));
  if (!sol.ok()) {
    out.feasible = false;
    // below v_min the lower speed row can be unattainable; keep the safety rows
    if (s0.v < lim.v_min) sol = qp::solve(build(false));
    if (!sol.ok()) {
      out.u = lim.u_min;
      return out;
    }
  }
  out.u = sol.u[0];
  return out;
}

// ---------------------------------------------------------------- orderings

// Merges the two on-road orders of CZ k by ascending key (ties by index), so
// neither suborder is violated.
template <class Key>
Sequence merge_by_key(const CoordinatorTables& t, int k, Key key) {
  const Sequence f0 = t.segment_order(k, SegmentClass::kRing);
  const Sequence f1 = t.segment_order(k, SegmentClass::kEntry);
  Sequence out;
  std::size_t i = 0, j = 0;
  while (i < f0.size() || j < f1.size()) {
    bool take0;
    if (i == f0.size())
      take0 = false;
    else if (j == f1.size())
      take0 = true;
    else {
      const double a = key(f0[i]), b = key(f1[j]);
      take0 = a < b || (a == b && f0[i] < f1[j]);
    }
    out.push_back(take0 ? f0[i++] : f1[j++]);
  }
  return out;
}

// Entry order: ascending coordinator index. A CAV that entered earlier can
// sit behind a later one on the ring (full loops), so the road order wins.
inline Sequence fifo_order(const CoordinatorTables& t, int k) {
  return merge_by_key(t, k, [](int idx) { return static_cast<double>(idx); });
}

// Shortest time (or distance) to the MP first.
inline Sequence sdf_order(const CoordinatorTables& t, int k, bool pure_distance = false) {
  const double L = t.topology().segment_length();
  return merge_by_key(t, k, [&](int idx) {
    const auto& s = t.at(idx).state;
    const double d = std::max(L - s.x, 0.0);
    return pure_distance ? d : d / std::max(s.v, 1e-6);
  });
}

// ---------------------------------------------------------------- car following

// Intelligent-driver-model parameters for the human-driven stand-in
// ("CF-baseline").
struct CarFollowingConfig {
  double a = 2.0;              // maximum acceleration [m/s^2]
  double b = 3.0;              // comfortable deceleration [m/s^2]
  double s0 = 2.0;             // standstill gap [m]
  double headway = 1.5;        // time headway [s]
  double exponent = 4.0;
  double critical_gap = 3.0;   // [s] time-to-MP of a ring vehicle that forces a yield

  void validate() const {
    if (!(a > 0 && b > 0 && s0 >= 0 && headway >= 0 && exponent > 0 && critical_gap >= 0))
      throw std::invalid_argument("car following: invalid parameters");
  }
};

inline double idm_accel(double v, double v_desired, std::optional<std::pair<double, double>> lead,
                        const CarFollowingConfig& c) {
  double acc = c.a * (1.0 - std::pow(std::max(v, 0.0) / v_desired, c.exponent));
  if (lead) {
    const auto [gap, v_lead] = *lead;
    const double s_star =
        c.s0 + std::max(0.0, v * c.headway + v * (v - v_lead) / (2.0 * std::sqrt(c.a * c.b)));
    acc -= c.a * std::pow(s_star / std::max(gap, 0.1), 2.0);
  }
  return acc;
}

// leader: (gap, leader speed); stop_distance: distance to a stop line when
// yielding. The returned control never drives the speed below zero.
inline double car_following_step(VehicleState s, std::optional<std::pair<double, double>> leader,
                                 std::optional<double> stop_distance, const Limits& lim,
                                 const CarFollowingConfig& c, double td) {
  double acc = idm_accel(s.v, lim.v_max, leader, c);
  if (stop_distance) acc = std::min(acc, idm_accel(s.v, lim.v_max, std::pair{*stop_distance, 0.0}, c));
  acc = lim.clamp(acc);
  return std::max(acc, -s.v / td);
}

// A vehicle on the entry road yields when it can still stop before the MP
// and a ring vehicle would reach the MP within the critical gap.
inline bool should_yield(VehicleState entering, double segment_length,
                         double min_ring_time_to_mp, const Limits& lim,
                         const CarFollowingConfig& c) {
  const double to_mp = segment_length - entering.x;
  const double stopping = entering.v * entering.v / (2.0 * -lim.u_min);
  if (to_mp < stopping) return false;
  return min_ring_time_to_mp < c.critical_gap;
}

}  // namespace roundabout
