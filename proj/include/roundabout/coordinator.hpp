#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roundabout/dynamics.hpp"
#include "roundabout/topology.hpp"

namespace roundabout {

class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Merging order for one zone's group: a list of coordinator indices.
using Sequence = std::vector<int>;

// One row of a zone's coordinator table.
struct CavRecord {
  int idx = 0;
  int uid = 0;  // stable id for logging; never renumbered
  VehicleState state;
  int initial_cz = 1;
  int final_cz = 1;
  int current_cz = 1;
  int c = SegmentClass::kEntry;
  std::optional<int> ip;
  std::optional<int> im;

  // Leaves the roundabout at the merging point ahead of it.
  bool exits_at_next_mp() const {
    return current_cz == final_cz && c == SegmentClass::kRing;
  }
};

struct Neighbors {
  std::optional<int> ip;
  std::optional<int> im;
  int ip_offset = 0;  // zones between the CAV and its i_p, counterclockwise
};

using NeighborMap = std::map<int, Neighbors>;

class CoordinatorTables {
 public:
  explicit CoordinatorTables(RoundaboutTopology topo, Limits limits = {})
      : topo_(topo), limits_(limits), tables_(topo.n_cz()) {}

  const RoundaboutTopology& topology() const { return topo_; }
  const Limits& limits() const { return limits_; }

  int size() const {
    int n = 0;
    for (const auto& t : tables_) n += static_cast<int>(t.size());
    return n;
  }

  const std::vector<CavRecord>& table(int k) const { return tables_.at(check(k) - 1); }

  const CavRecord* find(int idx) const {
    for (const auto& t : tables_)
      for (const auto& r : t)
        if (r.idx == idx) return &r;
    return nullptr;
  }
  CavRecord* find(int idx) {
    return const_cast<CavRecord*>(std::as_const(*this).find(idx));
  }
  const CavRecord& at(int idx) const {
    const CavRecord* r = find(idx);
    if (!r) throw ProtocolError("unknown CAV index " + std::to_string(idx));
    return *r;
  }
  CavRecord& at(int idx) { return const_cast<CavRecord&>(std::as_const(*this).at(idx)); }

  // Coordinator indices of one segment, front (closest to the MP) first.
  std::vector<int> segment_order(int k, int c) const {
    std::vector<int> out;
    for (const auto& r : table(k))
      if (r.c == c) out.push_back(r.idx);
    return out;
  }

  // Rear-end condition at the start of the entry road against the last CAV
  // already on it.
  bool can_spawn(int entry_cz, double v0) const {
    const auto order = segment_order(entry_cz, SegmentClass::kEntry);
    if (order.empty()) return true;
    const double gap = at(order.back()).state.x;
    return gap >= limits_.phi * v0 + limits_.delta;
  }

  int on_arrival(int entry_cz, int exit_cz, VehicleState s0, int uid = -1) {
    check(entry_cz);
    check(exit_cz);
    if (s0.x != 0.0) throw ProtocolError("arrival must start at x = 0");
    if (!can_spawn(entry_cz, s0.v)) throw ProtocolError("spawn blocked by rear-end gap");
    CavRecord r;
    r.idx = size() + 1;
    r.uid = uid >= 0 ? uid : next_uid_;
    next_uid_ = std::max(next_uid_, r.uid + 1);
    r.state = s0;
    r.initial_cz = entry_cz;
    r.final_cz = exit_cz;
    r.current_cz = entry_cz;
    r.c = SegmentClass::kEntry;
    tables_[entry_cz - 1].push_back(r);
    refresh_columns();
    return r.idx;
  }

  // Inserts a fully specified record (snapshots, fixtures). Indices are
  // taken as given.
  void insert(const CavRecord& r) {
    check(r.current_cz);
    if (find(r.idx)) throw ProtocolError("duplicate CAV index " + std::to_string(r.idx));
    tables_[r.current_cz - 1].push_back(r);
    next_uid_ = std::max(next_uid_, r.uid + 1);
    keep_road_order(r.current_cz, r.c);
  }

  void on_exit(int idx) {
    const CavRecord& r = at(idx);
    if (!r.exits_at_next_mp())
      throw ProtocolError("CAV " + std::to_string(idx) + " is not at its exit");
    auto& t = tables_[r.current_cz - 1];
    t.erase(std::find_if(t.begin(), t.end(), [&](const CavRecord& q) { return q.idx == idx; }));
    auto renumber = [&](std::optional<int>& ref) {
      if (!ref) return;
      if (*ref == idx)
        ref.reset();
      else if (*ref > idx)
        --*ref;
    };
    for (auto& tab : tables_) {
      for (auto& q : tab) {
        if (q.idx > idx) --q.idx;
        renumber(q.ip);
        renumber(q.im);
      }
    }
    refresh_columns();
  }

  void on_cz_transition(int idx, int from_cz) {
    CavRecord r = at(idx);
    if (r.current_cz != from_cz)
      throw ProtocolError("CAV " + std::to_string(idx) + " is not in zone " + std::to_string(from_cz));
    if (r.exits_at_next_mp())
      throw ProtocolError("CAV " + std::to_string(idx) + " reached its exit; use on_exit");
    auto& from = tables_[from_cz - 1];
    from.erase(std::find_if(from.begin(), from.end(), [&](const CavRecord& q) { return q.idx == idx; }));
    r.current_cz = topo_.next_cz(from_cz);
    r.c = SegmentClass::kRing;
    r.state.x = std::max(0.0, r.state.x - topo_.segment_length());
    r.ip.reset();
    r.im.reset();
    tables_[r.current_cz - 1].push_back(r);
    keep_road_order(r.current_cz, r.c);
    refresh_columns();
  }

  // Recomputes the sequence-independent part of the columns: the i_p of
  // every CAV that has a predecessor on its own segment. References to CAVs
  // that no longer qualify are cleared.
  void refresh_columns() {
    for (int k = 1; k <= topo_.n_cz(); ++k) {
      for (int c : {SegmentClass::kRing, SegmentClass::kEntry}) {
        const auto order = segment_order(k, c);
        for (std::size_t i = 0; i < order.size(); ++i) {
          CavRecord& r = at(order[i]);
          if (i > 0) {
            r.ip = order[i - 1];
          } else if (r.ip) {
            const CavRecord* p = find(*r.ip);
            if (!p || p->current_cz == k || r.exits_at_next_mp()) r.ip.reset();
          }
        }
      }
    }
    for (auto& t : tables_) {
      for (auto& r : t) {
        if (!r.im) continue;
        const CavRecord* m = find(*r.im);
        if (!m || m->current_cz != r.current_cz || m->c == r.c) r.im.reset();
      }
    }
  }

  void apply(const NeighborMap& nb) {
    for (const auto& [idx, n] : nb) {
      CavRecord& r = at(idx);
      r.ip = n.ip;
      r.im = n.im;
    }
  }

  // One record per line, tables in zone order.
  std::string to_text() const {
    std::string out;
    char buf[256];
    auto opt = [](const std::optional<int>& o) { return o ? std::to_string(*o) : std::string("-"); };
    for (int k = 1; k <= topo_.n_cz(); ++k) {
      for (const auto& r : table(k)) {
        std::snprintf(buf, sizeof buf,
                      "S%d idx=%d uid=%d x=%.6f v=%.6f initial=%d final=%d current=%d c=%d ",
                      k, r.idx, r.uid, r.state.x, r.state.v, r.initial_cz, r.final_cz,
                      r.current_cz, r.c);
        out += buf;
        out += "ip=" + opt(r.ip) + " im=" + opt(r.im) + "\n";
      }
    }
    return out;
  }

  std::vector<CavRecord>& mutable_table(int k) { return tables_.at(check(k) - 1); }

 private:
  int check(int k) const {
    if (!topo_.valid_cz(k)) throw std::invalid_argument("zone index out of range");
    return k;
  }

  // Restores front-to-back order among rows sharing a segment without
  // moving rows of the other segment.
  void keep_road_order(int k, int c) {
    auto& t = tables_[k - 1];
    std::vector<std::size_t> slots;
    std::vector<CavRecord> rows;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i].c == c) {
        slots.push_back(i);
        rows.push_back(t[i]);
      }
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const CavRecord& a, const CavRecord& b) { return a.state.x > b.state.x; });
    for (std::size_t j = 0; j < slots.size(); ++j) t[slots[j]] = rows[j];
  }

  RoundaboutTopology topo_;
  Limits limits_;
  std::vector<std::vector<CavRecord>> tables_;
  int next_uid_ = 0;
};

// Partitions f by segment class and assigns i_m (closest earlier CAV of the
// other class; none for a CAV leaving at this MP) and i_p (previous CAV of the same class, otherwise the last
// ring CAV in the first downstream zone that has one, searching no further
// than the CAV's exit zone).
inline NeighborMap assign_neighbors(const CoordinatorTables& tables, int k, const Sequence& f) {
  const auto& rows = tables.table(k);
  {
    std::vector<int> a(f), b;
    for (const auto& r : rows) b.push_back(r.idx);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw std::invalid_argument("assign_neighbors: sequence is not a permutation of the zone");
  }
  const auto& topo = tables.topology();
  NeighborMap out;
  for (std::size_t pos = 0; pos < f.size(); ++pos) {
    const CavRecord& r = tables.at(f[pos]);
    Neighbors n;
    std::optional<int> same_prev;
    for (std::size_t j = pos; j-- > 0;) {
      const CavRecord& q = tables.at(f[j]);
      if (q.c != r.c && !n.im && !r.exits_at_next_mp()) n.im = q.idx;
      if (q.c == r.c && !same_prev) same_prev = q.idx;
      if ((n.im || r.exits_at_next_mp()) && same_prev) break;
    }
    if (same_prev) {
      n.ip = same_prev;
    } else if (!r.exits_at_next_mp()) {
      for (int z = topo.next_cz(k); z != k; z = topo.next_cz(z)) {
        const auto& tz = tables.table(z);
        std::optional<int> last;
        for (const auto& cand : tz) {
          if (cand.c != SegmentClass::kRing) continue;
          const bool referenced = std::any_of(tz.begin(), tz.end(), [&](const CavRecord& o) {
            return o.ip && *o.ip == cand.idx;
          });
          if (!referenced) last = cand.idx;
        }
        if (last) {
          n.ip = last;
          n.ip_offset = topo.cz_offset(k, z);
          break;
        }
        if (z == r.final_cz) break;
      }
    }
    out[r.idx] = n;
  }
  return out;
}

}  // namespace roundabout
