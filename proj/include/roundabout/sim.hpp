#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "roundabout/baselines.hpp"
#include "roundabout/coordinator.hpp"
#include "roundabout/mpc.hpp"
#include "roundabout/sequencing.hpp"
#include "roundabout/topology.hpp"

namespace roundabout {

enum class Controller { MpcClbf, OcbfFifo, OcbfSdf, CfBaseline };

inline const char* to_string(Controller c) {
  switch (c) {
    case Controller::MpcClbf: return "mpc-clbf";
    case Controller::OcbfFifo: return "ocbf-fifo";
    case Controller::OcbfSdf: return "ocbf-sdf";
    case Controller::CfBaseline: return "cf-baseline";
  }
  return "?";
}

inline std::optional<Controller> parse_controller(const std::string& s) {
  for (Controller c : {Controller::MpcClbf, Controller::OcbfFifo, Controller::OcbfSdf,
                       Controller::CfBaseline})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

struct ScenarioConfig {
  int n_cz = 3;
  double segment_length = 60.0;
  std::vector<double> arrival_rates{396.0, 396.0, 396.0};  // CAVs/h per origin
  double duration = 300.0;
  double td = 0.1;
  int horizon = 20;
  Controller controller = Controller::MpcClbf;
  double alpha = 0.1;
  double lambda = 0.5;
  Limits limits;
  ClassKConfig gammas;
  double p_default = 1.0;
  int clbf_n = 1;
  bool sampled_data = true;
  std::uint64_t seed = 1;
  double entry_speed = 15.0;
  bool allow_full_loop = true;
  bool sdf_pure_distance = false;
  double ocbf_weight = 1.0;
  bool ocbf_sampled_data = false;
  CarFollowingConfig car_following;
  bool count_queue_time = false;

  // Weight on travel time that makes alpha the time/energy trade-off.
  double beta() const {
    const double umax2 = std::max(limits.u_max * limits.u_max, limits.u_min * limits.u_min);
    return alpha * umax2 / (2.0 * (1.0 - alpha));
  }

  void validate() const {
    if (n_cz < 2) throw std::invalid_argument("config: n_cz must be >= 2");
    if (!(segment_length > 0)) throw std::invalid_argument("config: segment_length must be > 0");
    if (static_cast<int>(arrival_rates.size()) != n_cz)
      throw std::invalid_argument("config: need one arrival rate per origin");
    for (double r : arrival_rates)
      if (!(r >= 0)) throw std::invalid_argument("config: arrival rates must be >= 0");
    if (!(duration >= 0)) throw std::invalid_argument("config: duration must be >= 0");
    if (!(td > 0)) throw std::invalid_argument("config: td must be > 0");
    if (horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
    if (!(alpha >= 0 && alpha < 1)) throw std::invalid_argument("config: alpha must be in [0, 1)");
    if (!(entry_speed >= limits.v_min && entry_speed <= limits.v_max))
      throw std::invalid_argument("config: entry_speed outside speed limits");
    if (!allow_full_loop && n_cz < 2) throw std::invalid_argument("config: no admissible exits");
    limits.validate();
    mpc().validate();
    ocbf().validate();
    car_following.validate();
  }

  MpcConfig mpc() const {
    MpcConfig m;
    m.horizon = horizon;
    m.td = td;
    m.lambda = lambda;
    m.beta = beta();
    m.segment_length = segment_length;
    m.limits = limits;
    m.gammas = gammas;
    m.p_default = p_default;
    m.clbf_n = clbf_n;
    m.sampled_data = sampled_data;
    return m;
  }
  OcbfConfig ocbf() const { return {ocbf_weight, gammas, ocbf_sampled_data}; }
};

// ------------------------------------------------------------------ arrivals

struct Arrival {
  double t = 0.0;
  int entry_cz = 1;
  int exit_cz = 1;
  int uid = 0;
};

// Poisson arrivals per origin, exits uniform over the reachable zones.
// Sorted by time (then origin); uids follow that order. Each origin has its
// own stream, so the trace for a shorter duration is a prefix.
inline std::vector<Arrival> generate_arrivals(const ScenarioConfig& cfg) {
  std::vector<Arrival> out;
  const int max_offset = cfg.allow_full_loop ? cfg.n_cz : cfg.n_cz - 1;
  std::uniform_int_distribution<int> offset(1, max_offset);
  for (int o = 1; o <= cfg.n_cz; ++o) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(o)};
    std::mt19937_64 rng(seq);
    const double rate = cfg.arrival_rates[o - 1] / 3600.0;
    if (rate <= 0.0) continue;
    std::exponential_distribution<double> gap(rate);
    double t = gap(rng);
    while (t < cfg.duration) {
      const int exit_cz = (o - 1 + offset(rng)) % cfg.n_cz + 1;
      out.push_back({t, o, exit_cz, 0});
      t += gap(rng);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Arrival& a, const Arrival& b) {
    return a.t < b.t || (a.t == b.t && a.entry_cz < b.entry_cz);
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].uid = static_cast<int>(i);
  return out;
}

// FNV-1a over the trace, for checking that runs share one trace.
inline std::uint64_t trace_hash(const std::vector<Arrival>& trace) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& a : trace) {
    mix(&a.t, sizeof a.t);
    mix(&a.entry_cz, sizeof a.entry_cz);
    mix(&a.exit_cz, sizeof a.exit_cz);
  }
  return h;
}

// ------------------------------------------------------------------ metrics

struct TrajectoryRow {
  double t = 0.0;
  int cav_id = 0;
  int cz = 0;
  int segment_class = 0;
  double x = 0.0, v = 0.0, u = 0.0;
  int sequence_id = 0;
  bool unsafe = false;
  bool fallback = false;
};

inline double record_energy(double u, double td) { return 0.5 * u * u * td; }

struct ZoneMetrics {
  int visits = 0;
  double avg_time = 0.0;
  double avg_energy = 0.0;
  double avg_objective = 0.0;
};

struct Totals {
  double time = 0.0;
  double energy = 0.0;
  double objective = 0.0;
  std::vector<ZoneMetrics> per_cz;
};

// Everything here is recomputable from the trajectory table.
inline Totals compute_totals(const std::vector<TrajectoryRow>& rows, double td, double beta,
                             int n_cz) {
  Totals t;
  t.per_cz.assign(n_cz, {});
  std::vector<double> zt(n_cz, 0.0), ze(n_cz, 0.0);
  std::vector<std::set<std::tuple<int, int, int>>> visits(n_cz);
  // a visit ends when the CAV leaves the segment; full loops revisit a zone
  std::map<int, std::pair<int, int>> last_seg;
  std::map<int, int> visit_no;
  for (const auto& r : rows) {
    const double e = record_energy(r.u, td);
    t.time += td;
    t.energy += e;
    zt[r.cz - 1] += td;
    ze[r.cz - 1] += e;
    const auto seg = std::make_pair(r.cz, r.segment_class);
    auto it = last_seg.find(r.cav_id);
    if (it == last_seg.end() || it->second != seg) {
      last_seg[r.cav_id] = seg;
      ++visit_no[r.cav_id];
    }
    visits[r.cz - 1].insert({r.cav_id, visit_no[r.cav_id], r.segment_class});
  }
  t.objective = beta * t.time + t.energy;
  for (int k = 0; k < n_cz; ++k) {
    auto& z = t.per_cz[k];
    z.visits = static_cast<int>(visits[k].size());
    if (z.visits > 0) {
      z.avg_time = zt[k] / z.visits;
      z.avg_energy = ze[k] / z.visits;
      z.avg_objective = beta * z.avg_time + z.avg_energy;
    }
  }
  return t;
}

struct MetricsSummary {
  std::string controller;
  int horizon = 0;
  std::uint64_t seed = 0;
  double duration = 0.0;
  double td = 0.0;
  double beta = 0.0;
  Totals totals;
  double queue_time = 0.0;  // spent waiting to enter; added to totals only on request
  int infeasible_count = 0;
  int unsafe_count = 0;
  int collision_count = 0;
  int arrivals = 0;
  int entered = 0;
  int exited = 0;
  int in_system = 0;
  int queued = 0;
  int resequencings = 0;
  int sequences_evaluated = 0;
  int fallback_steps = 0;
  int clamped = 0;  // controller outputs outside the box, clamped by the plant
  long qp_solves = 0;
  double qp_seconds = 0.0;
  double avg_qp_ms() const { return qp_solves ? 1e3 * qp_seconds / qp_solves : 0.0; }
  std::uint64_t trace_hash = 0;
  double wall_seconds = 0.0;
};

struct SimResult {
  MetricsSummary summary;
  std::vector<TrajectoryRow> rows;
};

// Rear-end condition with the margin exactly on the boundary counted as safe.
inline bool check_unsafe(double gap, double v, const Limits& lim) {
  return gap < lim.phi * v + lim.delta - 1e-9;
}

// What the plant actually applies: the box clamp, and no reversing (a
// braking command larger than the speed allows stops the vehicle in the step).
inline double plant_control(double u, double v, const Limits& lim, double td) {
  return std::max(std::clamp(u, lim.u_min, lim.u_max), -std::max(v, 0.0) / td);
}

// ------------------------------------------------------------------ engine

class Simulation {
 public:
  Simulation(ScenarioConfig cfg, std::vector<Arrival> trace)
      : cfg_(std::move(cfg)),
        topo_(cfg_.n_cz, cfg_.segment_length),
        tables_(topo_, cfg_.limits),
        mpc_(cfg_.mpc()),
        trace_(std::move(trace)),
        zones_(cfg_.n_cz),
        queues_(cfg_.n_cz) {
    cfg_.validate();
    summary_.controller = to_string(cfg_.controller);
    summary_.horizon = cfg_.horizon;
    summary_.seed = cfg_.seed;
    summary_.duration = cfg_.duration;
    summary_.td = cfg_.td;
    summary_.beta = cfg_.beta();
    summary_.arrivals = static_cast<int>(trace_.size());
    summary_.trace_hash = trace_hash(trace_);
    steps_ = static_cast<long>(std::llround(cfg_.duration / cfg_.td));
  }

  explicit Simulation(const ScenarioConfig& cfg) : Simulation(cfg, generate_arrivals(cfg)) {}

  bool done() const { return n_ >= steps_; }
  double time() const { return n_ * cfg_.td; }
  const CoordinatorTables& tables() const { return tables_; }
  const std::vector<TrajectoryRow>& rows() const { return rows_; }

  // optional observer of every per-step MPC plan (uid, plan)
  std::function<void(double, int, const PlanResult&)> on_plan;

  void advance() {
    const double t = time();
    spawn(t);
    resequence_dirty(t);
    auto controls = compute_controls(t);
    for (auto& [uid, u] : controls) {
      const double v = rec(uid).state.v;
      const double applied = plant_control(u, v, cfg_.limits, cfg_.td);
      if (applied != u && (u > cfg_.limits.u_max || u < cfg_.limits.u_min)) ++summary_.clamped;
      u = applied;
    }
    log_and_check(t, controls);
    integrate(controls);
    ++n_;
    dispatch_events(time());
  }

  SimResult finish() {
    while (!done()) advance();
    auto& s = summary_;
    s.totals = compute_totals(rows_, cfg_.td, cfg_.beta(), cfg_.n_cz);
    for (const auto& q : queues_) {
      s.queued += static_cast<int>(q.size());
      for (const auto& a : q) s.queue_time += time() - a.t;
    }
    if (cfg_.count_queue_time) {
      s.totals.time += s.queue_time;
      s.totals.objective = cfg_.beta() * s.totals.time + s.totals.energy;
    }
    s.in_system = tables_.size();
    return {s, rows_};
  }

 private:
  struct Runtime {
    double t_entry = 0.0;
    int visit = 0;  // index into the route's zone list
    Route route;
    std::vector<double> nominal;
    std::optional<ClbfParams> held;
    PolyTrajectory reference;
    bool fallback = false;
    bool yielding = false;
    double last_u = 0.0;
  };
  struct Zone {
    std::vector<int> seq_uids;
    int sequence_id = 0;
    bool dirty = false;
  };
  struct Link {  // neighbour assignment by uid
    std::optional<int> ip;
    int ip_offset = 0;
    std::optional<int> im;
  };

  // ---------------------------------------------------------- helpers

  int idx_of(int uid) const {
    for (int k = 1; k <= cfg_.n_cz; ++k)
      for (const auto& r : tables_.table(k))
        if (r.uid == uid) return r.idx;
    throw ProtocolError("unknown uid " + std::to_string(uid));
  }
  const CavRecord& rec(int uid) const { return tables_.at(idx_of(uid)); }

  double remaining_distance(const CavRecord& r) const {
    const Runtime& rt = rt_.at(r.uid);
    return static_cast<double>(rt.route.zones.size() - rt.visit) * cfg_.segment_length - r.state.x;
  }

  Sequence to_idx(const std::vector<int>& uids) const {
    Sequence f;
    for (int u : uids) f.push_back(idx_of(u));
    return f;
  }
  std::vector<int> to_uid(const Sequence& f) const {
    std::vector<int> u;
    for (int i : f) u.push_back(tables_.at(i).uid);
    return u;
  }

  void relink_zone(int k, const Sequence& f) {
    const auto nb = assign_neighbors(tables_, k, f);
    for (const auto& [idx, n] : nb) {
      Link l;
      if (n.ip) l.ip = tables_.at(*n.ip).uid;
      l.ip_offset = n.ip_offset;
      if (n.im) l.im = tables_.at(*n.im).uid;
      links_[tables_.at(idx).uid] = l;
    }
    tables_.apply(nb);
  }

  // ---------------------------------------------------------- arrivals / events

  void spawn(double t) {
    while (next_arrival_ < trace_.size() && trace_[next_arrival_].t <= t + 1e-12) {
      const auto& a = trace_[next_arrival_++];
      queues_[a.entry_cz - 1].push_back(a);
    }
    for (int o = 1; o <= cfg_.n_cz; ++o) {
      auto& q = queues_[o - 1];
      if (q.empty() || !tables_.can_spawn(o, cfg_.entry_speed)) continue;
      const Arrival a = q.front();
      q.pop_front();
      summary_.queue_time += t - a.t;
      tables_.on_arrival(o, a.exit_cz, {0.0, cfg_.entry_speed}, a.uid);
      Runtime rt;
      rt.t_entry = t;
      rt.route = topo_.make_route(o, a.exit_cz);
      rt_[a.uid] = rt;
      ++summary_.entered;
      if (cfg_.controller == Controller::OcbfFifo || cfg_.controller == Controller::OcbfSdf)
        rt_[a.uid].reference = reference_for(rec(a.uid), t);
      zones_[o - 1].dirty = true;
    }
  }

  PolyTrajectory reference_for(const CavRecord& r, double t) const {
    return solve_unconstrained(t, r.state.v, std::max(remaining_distance(r), 1e-3), cfg_.beta(),
                               cfg_.limits.v_min);
  }

  void dispatch_events(double t) {
    const double L = cfg_.segment_length;
    std::vector<std::pair<int, int>> exits, moves;  // (idx, uid)
    for (int k = 1; k <= cfg_.n_cz; ++k) {
      for (const auto& r : tables_.table(k)) {
        if (r.state.x < L) continue;
        (r.exits_at_next_mp() ? exits : moves).push_back({r.idx, r.uid});
      }
    }
    std::sort(exits.begin(), exits.end());
    std::sort(moves.begin(), moves.end());
    for (const auto& [_, uid] : exits) {
      const auto& r = rec(uid);
      zones_[r.current_cz - 1].dirty = true;
      tables_.on_exit(r.idx);
      rt_.erase(uid);
      links_.erase(uid);
      ++summary_.exited;
    }
    for (const auto& [_, uid] : moves) {
      const auto& r = rec(uid);
      const int from = r.current_cz;
      zones_[from - 1].dirty = true;
      zones_[topo_.next_cz(from) - 1].dirty = true;
      tables_.on_cz_transition(r.idx, from);
      Runtime& rt = rt_.at(uid);
      ++rt.visit;
      if (cfg_.controller == Controller::OcbfFifo || cfg_.controller == Controller::OcbfSdf)
        rt.reference = reference_for(rec(uid), t);
    }
  }

  // ---------------------------------------------------------- sequencing

  void resequence_dirty(double t) {
    std::vector<int> changed;
    for (int k = 1; k <= cfg_.n_cz; ++k) {
      Zone& z = zones_[k - 1];
      if (!z.dirty) continue;
      changed.push_back(k);
      z.dirty = false;
      z.sequence_id = ++sequence_counter_;
      ++summary_.resequencings;
      for (const auto& r : tables_.table(k)) {
        rt_.at(r.uid).held.reset();
        rt_.at(r.uid).fallback = false;
      }
      if (tables_.table(k).empty()) {
        z.seq_uids.clear();
        continue;
      }
      Sequence f;
      switch (cfg_.controller) {
        case Controller::MpcClbf: f = select_mpc(k, t); break;
        case Controller::OcbfFifo: f = fifo_order(tables_, k); break;
        case Controller::OcbfSdf:
        case Controller::CfBaseline: f = sdf_order(tables_, k, cfg_.sdf_pure_distance); break;
      }
      z.seq_uids = to_uid(f);
    }
    if (changed.empty()) return;
    // cross-zone leaders may change whenever any table changed
    for (int k = 1; k <= cfg_.n_cz; ++k) relink_zone(k, to_idx(zones_[k - 1].seq_uids));
    if (cfg_.controller == Controller::OcbfFifo || cfg_.controller == Controller::OcbfSdf) {
      for (int k : changed) {
        bool bad = false;
        for (const auto& r : tables_.table(k)) bad |= !ocbf_control(r, t).feasible;
        if (bad) ++summary_.infeasible_count;
      }
    }
  }

  Sequence select_mpc(int k, double t) {
    const auto candidates = enumerate_feasible(tables_, k);
    using Plans = std::map<int, PlanResult>;
    SequenceEvaluator<Plans> ev = [&](const Sequence& f) -> std::optional<std::pair<double, Plans>> {
      auto r = plan_zone(k, f, t, true);
      if (!r) return std::nullopt;
      double cost = 0.0;
      for (const auto& [_, p] : *r) cost += p.cost;
      return std::pair<double, Plans>{cost, std::move(*r)};
    };
    SelectionStats stats;
    auto best = select_optimal(candidates, ev, &stats);
    summary_.sequences_evaluated += stats.evaluated;
    if (best) {
      for (const auto& [uid, p] : best->plans)
        if (p.params && !p.params->linear()) rt_.at(uid).held = p.params;
      return best->sequence;
    }
    ++summary_.infeasible_count;
    Sequence prev;
    for (int uid : zones_[k - 1].seq_uids)
      if (rt_.count(uid) && rec(uid).current_cz == k) prev.push_back(idx_of(uid));
    const Sequence sdf = sdf_order(tables_, k, cfg_.sdf_pure_distance);
    if (auto keep = retain_previous_order(candidates, prev, sdf)) return *keep;
    return sdf;
  }

  // Plans every CAV of zone k in the order f. With `strict`, any infeasible
  // plan rejects f; otherwise the CAV falls back to hard braking.
  std::optional<std::map<int, PlanResult>> plan_zone(int k, const Sequence& f, double t,
                                                     bool strict) {
    const auto nb = assign_neighbors(tables_, k, f);
    std::map<int, PlanResult> plans;  // by uid
    std::map<int, std::vector<double>> local;  // controls planned within this pass
    const double L = cfg_.segment_length;
    // best available prediction: this pass, this step, the previous plan,
    // constant speed
    auto predict = [&](const CavRecord& c, double shift) {
      const std::vector<double>* u = nullptr;
      if (auto it = local.find(c.uid); it != local.end())
        u = &it->second;
      else if (auto jt = step_controls_.find(c.uid); jt != step_controls_.end())
        u = &jt->second;
      else if (rt_.at(c.uid).nominal.size() == static_cast<std::size_t>(cfg_.horizon))
        u = &rt_.at(c.uid).nominal;
      return u ? NeighborTrack::from_controls(c.state, *u, cfg_.td, shift)
               : NeighborTrack::constant_velocity(c.state, cfg_.horizon, cfg_.td, shift);
    };
    for (int idx : f) {
      const CavRecord& r = tables_.at(idx);
      const Neighbors& n = nb.at(idx);
      Runtime& rt = rt_.at(r.uid);
      PlanRequest req;
      req.state = r.state;
      req.t = t;
      req.remaining_distance = remaining_distance(r);
      req.nominal = rt.nominal;
      if (!strict) req.held_params = rt.held;
      if (n.ip) {
        req.leader = predict(tables_.at(*n.ip), n.ip_offset * L);
      }
      if (n.im) {
        const CavRecord& m = tables_.at(*n.im);
        MergeContext mc;
        mc.track = predict(m, 0.0);
        mc.rear_after_mp = !m.exits_at_next_mp() && !r.exits_at_next_mp();
        req.merge = mc;
      }
      PlanResult p = plan_cav(req, mpc_);
      summary_.qp_solves += p.qp_solves;
      summary_.qp_seconds += p.qp_seconds;
      if (!p.feasible) {
        if (strict) return std::nullopt;
        p = plan_fallback(req, mpc_);
        summary_.qp_solves += p.qp_solves;
        summary_.qp_seconds += p.qp_seconds;
      }
      local[r.uid] = p.u;
      plans[r.uid] = std::move(p);
    }
    return plans;
  }

  // ---------------------------------------------------------- control

  OcbfResult ocbf_control(const CavRecord& r, double t) const {
    const Link& l = links_.at(r.uid);
    std::optional<NeighborSample> lead, merge;
    if (l.ip) {
      const auto& p = rec(*l.ip);
      lead = NeighborSample{p.state.x + l.ip_offset * cfg_.segment_length, p.state.v, 0.0};
    }
    if (l.im) {
      const auto& m = rec(*l.im);
      merge = NeighborSample{m.state.x, m.state.v, 0.0};
    }
    return ocbf_step(r.state, rt_.at(r.uid).reference, t, lead, merge, cfg_.segment_length,
                     cfg_.limits, cfg_.ocbf(), cfg_.td);
  }

  // Zones are planned downstream first so cross-zone leaders are usually
  // fresh this step. On the ring one link is necessarily planned against a
  // previous plan; it is put where the rear-end margin is largest.
  std::vector<int> planning_order() const {
    const int n = cfg_.n_cz;
    std::vector<double> slack(n, 1e18);  // smallest margin to a leader outside zone k
    for (int k = 1; k <= n; ++k) {
      for (const auto& r : tables_.table(k)) {
        const Link& l = links_.at(r.uid);
        if (!l.ip || l.ip_offset == 0) continue;
        const auto& p = rec(*l.ip);
        const double b3 = topo_.adjusted_gap(r.state.x, p.state.x, l.ip_offset) -
                          cfg_.limits.phi * r.state.v - cfg_.limits.delta;
        slack[k - 1] = std::min(slack[k - 1], b3);
      }
    }
    // starting at zone s and moving upstream, only the links leaving s are stale
    int best = 1;
    for (int k = 2; k <= n; ++k)
      if (slack[k - 1] > slack[best - 1]) best = k;
    std::vector<int> order;
    for (int i = 0; i < n; ++i) order.push_back((best - 1 - i + n) % n + 1);
    return order;
  }

  std::map<int, double> compute_controls(double t) {
    std::map<int, double> u;  // by uid
    step_controls_.clear();
    switch (cfg_.controller) {
      case Controller::MpcClbf:
        for (int k : planning_order()) {
          const auto& z = zones_[k - 1];
          if (z.seq_uids.empty()) continue;
          auto plans = *plan_zone(k, to_idx(z.seq_uids), t, false);
          for (auto& [uid, p] : plans) {
            if (on_plan) on_plan(t, uid, p);
            step_controls_[uid] = p.u;
            Runtime& rt = rt_.at(uid);
            const auto step = receding_step(p);
            rt.nominal = step.nominal;
            rt.fallback = p.branch == Branch::Fallback;
            u[uid] = step.applied;
          }
        }
        break;
      case Controller::OcbfFifo:
      case Controller::OcbfSdf:
        for (int k = 1; k <= cfg_.n_cz; ++k) {
          for (const auto& r : tables_.table(k)) {
            const auto res = ocbf_control(r, t);
            rt_.at(r.uid).fallback = !res.feasible;
            u[r.uid] = res.u;
          }
        }
        break;
      case Controller::CfBaseline:
        cf_controls(u);
        break;
    }
    return u;
  }

  void cf_controls(std::map<int, double>& u) {
    const double L = cfg_.segment_length;
    const auto& c = cfg_.car_following;
    // yield decisions first: ring vehicles use them to decide who is ahead
    for (int k = 1; k <= cfg_.n_cz; ++k) {
      double ring_ttm = 1e9;
      for (const auto& r : tables_.table(k))
        if (r.c == SegmentClass::kRing)
          ring_ttm = std::min(ring_ttm, (L - r.state.x) / std::max(r.state.v, 0.1));
      for (const auto& r : tables_.table(k))
        if (r.c == SegmentClass::kEntry)
          rt_.at(r.uid).yielding = should_yield(r.state, L, ring_ttm, cfg_.limits, c);
    }
    for (int k = 1; k <= cfg_.n_cz; ++k) {
      for (const auto& r : tables_.table(k)) {
        const Link& l = links_.at(r.uid);
        std::optional<std::pair<double, double>> lead;
        auto consider = [&](double gap, double v) {
          if (!lead || gap < lead->first) lead = std::pair{gap, v};
        };
        if (l.ip) {
          const auto& p = rec(*l.ip);
          consider(p.state.x + l.ip_offset * L - r.state.x, p.state.v);
        }
        // a vehicle from the other segment that has committed and is closer
        // to the shared MP is treated as a leader
        for (const auto& o : tables_.table(k)) {
          if (o.c == r.c || o.state.x <= r.state.x) continue;
          if (o.c == SegmentClass::kEntry && rt_.at(o.uid).yielding) continue;
          if (r.exits_at_next_mp() || o.exits_at_next_mp()) continue;
          consider(o.state.x - r.state.x, o.state.v);
        }
        std::optional<double> stop;
        if (r.c == SegmentClass::kEntry && rt_.at(r.uid).yielding) stop = L - r.state.x;
        u[r.uid] = car_following_step(r.state, lead, stop, cfg_.limits, c, cfg_.td);
      }
    }
  }

  // ---------------------------------------------------------- logging / plant

  void log_and_check(double t, const std::map<int, double>& u) {
    for (int k = 1; k <= cfg_.n_cz; ++k) {
      for (const auto& r : tables_.table(k)) {
        TrajectoryRow row;
        row.t = t;
        row.cav_id = r.uid;
        row.cz = k;
        row.segment_class = r.c;
        row.x = r.state.x;
        row.v = r.state.v;
        row.u = u.at(r.uid);
        row.sequence_id = zones_[k - 1].sequence_id;
        row.fallback = rt_.at(r.uid).fallback;
        const Link& l = links_.at(r.uid);
        if (l.ip) {
          const auto& p = rec(*l.ip);
          const double gap = topo_.adjusted_gap(r.state.x, p.state.x, l.ip_offset);
          row.unsafe = check_unsafe(gap, r.state.v, cfg_.limits);
          if (gap <= 0.0) ++summary_.collision_count;
        }
        if (row.unsafe) ++summary_.unsafe_count;
        if (row.fallback) ++summary_.fallback_steps;
        rows_.push_back(row);
      }
    }
  }

  void integrate(const std::map<int, double>& u) {
    for (int k = 1; k <= cfg_.n_cz; ++k) {
      for (auto& r : tables_.mutable_table(k)) {
        const double uk = u.at(r.uid);
        r.state = step(r.state, {uk}, cfg_.td);
        r.state.v = std::max(r.state.v, 0.0);  // rounding at standstill
        rt_.at(r.uid).last_u = uk;
      }
    }
  }

  ScenarioConfig cfg_;
  RoundaboutTopology topo_;
  CoordinatorTables tables_;
  MpcConfig mpc_;
  std::vector<Arrival> trace_;
  std::vector<Zone> zones_;
  std::vector<std::deque<Arrival>> queues_;
  std::map<int, Runtime> rt_;
  std::map<int, Link> links_;
  std::map<int, std::vector<double>> step_controls_;  // MPC plans made this step
  std::vector<TrajectoryRow> rows_;
  MetricsSummary summary_;
  std::size_t next_arrival_ = 0;
  int sequence_counter_ = 0;
  long n_ = 0;
  long steps_ = 0;
};

inline SimResult run(const ScenarioConfig& cfg, std::vector<Arrival> trace) {
  const auto t0 = std::chrono::steady_clock::now();
  Simulation sim(cfg, std::move(trace));
  SimResult r = sim.finish();
  r.summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline SimResult run(const ScenarioConfig& cfg) { return run(cfg, generate_arrivals(cfg)); }

}  // namespace roundabout
