#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <optional>
#include <stdexcept>
#include <vector>

#include "roundabout/dynamics.hpp"
#include "roundabout/qp.hpp"
#include "roundabout/safety.hpp"
#include "roundabout/unconstrained.hpp"

namespace roundabout {

struct MpcConfig {
  int horizon = 20;
  double td = 0.1;
  double lambda = 0.5;       // speed reward weight
  double beta = 8.0 / 9.0;   // time weight for the unconstrained branch
  double segment_length = 60.0;
  Limits limits;
  ClassKConfig gammas;
  double p_default = 1.0;
  int clbf_n = 1;
  bool sampled_data = true;

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("mpc: horizon must be >= 1");
    if (!(td > 0.0)) throw std::invalid_argument("mpc: td must be > 0");
    if (lambda < 0.0) throw std::invalid_argument("mpc: lambda must be >= 0");
    if (beta < 0.0) throw std::invalid_argument("mpc: beta must be >= 0");
    if (!(segment_length > 0.0)) throw std::invalid_argument("mpc: segment length must be > 0");
    if (!(p_default > 0.0)) throw std::invalid_argument("mpc: p_default must be > 0");
    if (clbf_n < 1) throw std::invalid_argument("mpc: clbf_n must be >= 1");
    limits.validate();
    gammas.validate();
  }
  double sample() const { return sampled_data ? td : 0.0; }
};

// A neighbour's predicted samples 0..H and the control it applies over each
// interval, in the frame of the CAV being planned.
struct NeighborTrack {
  std::vector<double> x, v, a;

  int horizon() const { return static_cast<int>(a.size()); }
  NeighborSample at(int h) const { return {x[h], v[h], a[h]}; }

  static NeighborTrack from_controls(VehicleState s0, const std::vector<double>& u, double td,
                                     double shift = 0.0) {
    NeighborTrack t;
    t.x.push_back(s0.x + shift);
    t.v.push_back(s0.v);
    VehicleState s = s0;
    for (double uh : u) {
      s = step(s, {uh}, td);
      t.x.push_back(s.x + shift);
      t.v.push_back(s.v);
      t.a.push_back(uh);
    }
    return t;
  }
  static NeighborTrack constant_velocity(VehicleState s0, int horizon, double td,
                                         double shift = 0.0) {
    return from_controls(s0, std::vector<double>(horizon, 0.0), td, shift);
  }
};

struct MergeContext {
  NeighborTrack track;
  // Both CAVs continue on the ring after the MP, so i_m becomes a leader once
  // it has crossed.
  bool rear_after_mp = false;
};

struct PlanRequest {
  VehicleState state;
  double t = 0.0;
  double remaining_distance = 0.0;  // to the exit; unconstrained branch only
  std::optional<NeighborTrack> leader;
  std::optional<MergeContext> merge;
  std::vector<double> nominal;  // shifted previous plan; empty = constant speed
  // (p, q) picked when the sequence was selected; reused while b4 < 0
  std::optional<ClbfParams> held_params;
};

enum class Branch {
  Unconstrained,
  RearOnly,
  MergeSafe,
  MergeClbf,
  GateInfeasible,
  PqInfeasible,
  QpInfeasible,
  Fallback,
};

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::Unconstrained: return "unconstrained";
    case Branch::RearOnly: return "rear_only";
    case Branch::MergeSafe: return "merge_safe";
    case Branch::MergeClbf: return "merge_clbf";
    case Branch::GateInfeasible: return "gate_infeasible";
    case Branch::PqInfeasible: return "pq_infeasible";
    case Branch::QpInfeasible: return "qp_infeasible";
    case Branch::Fallback: return "fallback";
  }
  return "?";
}

struct PlanResult {
  Branch branch = Branch::QpInfeasible;
  bool feasible = false;
  std::vector<double> u, v, x;  // v[h], x[h] after h+1 samples
  double cost = 0.0;
  std::optional<ClbfParams> params;
  double t_m = 0.0;
  int qp_solves = 0;
  double qp_seconds = 0.0;
};

// sum_h (u_h^2 / 2 - lambda v_{h+1}) = u'Qu/2 + c'u + constant.
struct ObjectiveTerms {
  Eigen::MatrixXd quadratic;
  Eigen::VectorXd linear;
  double constant = 0.0;

  double eval(const Eigen::VectorXd& u) const {
    return 0.5 * u.dot(quadratic * u) + linear.dot(u) + constant;
  }
};

inline ObjectiveTerms objective_terms(int horizon, double lambda, double td, double v0 = 0.0) {
  if (lambda < 0.0) throw std::invalid_argument("objective_terms: lambda must be >= 0");
  ObjectiveTerms o{Eigen::MatrixXd::Identity(horizon, horizon), Eigen::VectorXd(horizon),
                   -lambda * horizon * v0};
  for (int j = 0; j < horizon; ++j) o.linear[j] = -lambda * td * (horizon - j);
  return o;
}

// Time for a track to reach `target`, interpolated inside the horizon and
// extrapolated at the final speed beyond it.
inline double time_to_reach(const NeighborTrack& t, double target, double td) {
  if (t.x[0] >= target) return 0.0;
  for (int h = 1; h <= t.horizon(); ++h) {
    if (t.x[h] >= target) {
      const double frac = (target - t.x[h - 1]) / (t.x[h] - t.x[h - 1]);
      return (h - 1 + frac) * td;
    }
  }
  const int H = t.horizon();
  return H * td + (target - t.x[H]) / std::max(t.v[H], 1e-3);
}

namespace detail {

inline void add(qp::QpProblem& p, const ConstraintRow& r) { p.add_row(r.coef, r.offset, r.tag); }

inline qp::QpProblem base_problem(const MpcConfig& cfg, const std::vector<AffineState>& s) {
  const int H = cfg.horizon;
  qp::QpProblem p(H);
  p.lower.setConstant(cfg.limits.u_min);
  p.upper.setConstant(cfg.limits.u_max);
  for (int h = 0; h < H; ++h) {
    auto [hi, lo] = row_vlimits(s[h], h, cfg.limits, cfg.gammas, cfg.sample());
    add(p, hi);
    add(p, lo);
  }
  return p;
}

inline void add_leader_rows(qp::QpProblem& p, const MpcConfig& cfg,
                            const std::vector<AffineState>& s, const NeighborTrack& lead) {
  for (int h = 0; h < cfg.horizon; ++h)
    add(p, row_rear_end(s[h], lead.at(h), h, cfg.limits, cfg.gammas.gamma_rear, cfg.sample()));
}

inline qp::QpSolution timed_solve(const qp::QpProblem& p, PlanResult& out) {
  const auto t0 = std::chrono::steady_clock::now();
  auto sol = qp::solve(p);
  out.qp_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ++out.qp_solves;
  return sol;
}

inline void finish(PlanResult& out, const Eigen::VectorXd& u, VehicleState s0,
                   const MpcConfig& cfg) {
  out.u.assign(u.data(), u.data() + u.size());
  const auto tr = rollout(s0, out.u, cfg.td);
  out.v = tr.v;
  out.x = tr.x;
  out.cost = objective_terms(cfg.horizon, cfg.lambda, cfg.td, s0.v).eval(u);
  out.feasible = true;
}

inline void plan_unconstrained(const PlanRequest& req, const MpcConfig& cfg,
                               const std::vector<AffineState>& s, PlanResult& out) {
  const int H = cfg.horizon;
  Eigen::VectorXd ref = Eigen::VectorXd::Zero(H);
  if (req.remaining_distance > 1e-6) {
    const auto poly = solve_unconstrained(req.t, std::max(req.state.v, 0.0),
                                          req.remaining_distance, cfg.beta, cfg.limits.v_min);
    for (int h = 0; h < H; ++h) ref[h] = eval_extended(poly, req.t + (h + 0.5) * cfg.td).u;
  }
  // keep the reference where it is admissible, project it otherwise
  qp::QpProblem p = base_problem(cfg, s);
  p.hessian.setIdentity();
  p.linear = -ref;
  const auto sol = timed_solve(p, out);
  if (!sol.ok()) {
    out.branch = Branch::QpInfeasible;
    return;
  }
  finish(out, sol.u, req.state, cfg);
}

}  // namespace detail

inline PlanResult plan_cav(const PlanRequest& req, const MpcConfig& cfg) {
  const int H = cfg.horizon;
  const double L = cfg.segment_length;
  const Limits& lim = cfg.limits;
  const auto s = lifted_states(req.state, H, cfg.td);
  PlanResult out;

  if (!req.leader && !req.merge) {
    out.branch = Branch::Unconstrained;
    detail::plan_unconstrained(req, cfg, s, out);
    return out;
  }

  qp::QpProblem p = detail::base_problem(cfg, s);
  const auto obj = objective_terms(H, cfg.lambda, cfg.td, req.state.v);
  p.hessian = obj.quadratic;
  p.linear = obj.linear;
  if (req.leader) detail::add_leader_rows(p, cfg, s, *req.leader);

  out.branch = Branch::RearOnly;
  if (req.merge && req.merge->track.x[0] < L) {
    const NeighborTrack& im = req.merge->track;
    const double b4 = merge_barrier(req.state.x, req.state.v, im.x[0], L, lim);
    const double bbar = merge_bbar(req.state.v, im.x[0], im.v[0], L, lim);
    out.t_m = time_to_reach(im, L, cfg.td);
    const auto params =
        (b4 < 0.0 && req.held_params && !req.held_params->linear())
            ? req.held_params
            : choose_pq(b4, -bbar, bbar, out.t_m, cfg.clbf_n, cfg.p_default);
    if (!params) {
      out.branch = (b4 < 0.0 && -bbar < 0.0) ? Branch::GateInfeasible : Branch::PqInfeasible;
      return out;
    }
    out.params = params;
    out.branch = params->linear() ? Branch::MergeSafe : Branch::MergeClbf;

    std::vector<double> nominal = req.nominal;
    nominal.resize(H, nominal.empty() ? 0.0 : nominal.back());
    const auto nom = NeighborTrack::from_controls(req.state, nominal, cfg.td);
    for (int h = 0; h < H; ++h) {
      if (im.x[h] >= L) break;
      const double nb4 = merge_barrier(nom.x[h], nom.v[h], im.x[h], L, lim);
      ConstraintRow row =
          (params->linear() || nb4 >= 0.0)
              ? row_merge_cbf(s[h], im.at(h), h, lim, L, params->p, cfg.sample())
              : row_merge_clbf(s[h], im.at(h), *params, nb4, h, lim, L, cfg.sample());
      detail::add(p, row);
    }
  }
  // once i_m is past the MP it may become a leader
  if (req.merge && req.merge->rear_after_mp) {
    const NeighborTrack& im = req.merge->track;
    for (int h = 0; h < H; ++h) {
      if (im.x[h] < L) continue;
      detail::add(p, row_rear_end(s[h], im.at(h), h, lim, cfg.gammas.gamma_rear, cfg.sample()));
    }
  }

  const auto sol = detail::timed_solve(p, out);
  if (!sol.ok()) {
    out.branch = Branch::QpInfeasible;
    return out;
  }
  detail::finish(out, sol.u, req.state, cfg);
  return out;
}

// Used when a CAV has no admissible plan: merging rows dropped, braking as
// hard as the speed and rear-end rows allow (rear-end rows against a merged
// i_m kept if they can be). If the CAV is already below
// v_min the lower speed rows cannot hold; it then drives on with the upper
// speed and rear-end rows only. Box bounds alone are the last resort.
inline PlanResult plan_fallback(const PlanRequest& req, const MpcConfig& cfg) {
  const int H = cfg.horizon;
  const auto s = lifted_states(req.state, H, cfg.td);
  PlanResult out;
  out.branch = Branch::Fallback;
  // brake now as hard as allowed; later steps matter much less
  qp::QpProblem p = detail::base_problem(cfg, s);
  for (int h = 0; h < H; ++h) p.hessian(h, h) = h == 0 ? 1e3 : 1.0;
  p.linear = -cfg.limits.u_min * p.hessian.diagonal();
  if (req.leader) detail::add_leader_rows(p, cfg, s, *req.leader);
  if (req.merge && req.merge->rear_after_mp) {
    const NeighborTrack& im = req.merge->track;
    for (int h = 0; h < H; ++h)
      if (im.x[h] >= cfg.segment_length)
        detail::add(p, row_rear_end(s[h], im.at(h), h, cfg.limits, cfg.gammas.gamma_rear,
                                    cfg.sample()));
  }
  auto sol = detail::timed_solve(p, out);
  if (!sol.ok() && req.merge) {
    p = detail::base_problem(cfg, s);
    for (int h = 0; h < H; ++h) p.hessian(h, h) = h == 0 ? 1e3 : 1.0;
    p.linear = -cfg.limits.u_min * p.hessian.diagonal();
    if (req.leader) detail::add_leader_rows(p, cfg, s, *req.leader);
    sol = detail::timed_solve(p, out);
  }
  if (!sol.ok()) {
    qp::QpProblem q(H);
    q.lower.setConstant(cfg.limits.u_min);
    q.upper.setConstant(cfg.limits.u_max);
    for (int h = 0; h < H; ++h)
      detail::add(q, row_vlimits(s[h], h, cfg.limits, cfg.gammas, cfg.sample()).first);
    if (req.leader) detail::add_leader_rows(q, cfg, s, *req.leader);
    const auto obj = objective_terms(H, cfg.lambda, cfg.td, req.state.v);
    q.hessian = obj.quadratic;
    q.linear = obj.linear;
    sol = detail::timed_solve(q, out);
  }
  Eigen::VectorXd u = sol.ok() ? sol.u : Eigen::VectorXd::Constant(H, cfg.limits.u_min);
  detail::finish(out, u, req.state, cfg);
  return out;
}

struct RecedingStep {
  double applied = 0.0;
  std::vector<double> nominal;  // remaining plan shifted by one, last entry repeated
};

inline RecedingStep receding_step(const PlanResult& plan) {
  if (!plan.feasible || plan.u.empty())
    throw std::invalid_argument("receding_step: plan is not feasible");
  RecedingStep r;
  r.applied = plan.u.front();
  r.nominal.assign(plan.u.begin() + 1, plan.u.end());
  r.nominal.push_back(plan.u.back());
  return r;
}

}  // namespace roundabout
