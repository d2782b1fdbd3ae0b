#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "roundabout/coordinator.hpp"

namespace roundabout {

// All order-preserving interleavings of two subsequences, sorted
// lexicographically.
inline std::vector<Sequence> interleavings(const Sequence& f0, const Sequence& f1) {
  std::vector<Sequence> out;
  Sequence cur;
  cur.reserve(f0.size() + f1.size());
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) {
    if (i == f0.size() && j == f1.size()) {
      out.push_back(cur);
      return;
    }
    if (i < f0.size()) {
      cur.push_back(f0[i]);
      rec(i + 1, j);
      cur.pop_back();
    }
    if (j < f1.size()) {
      cur.push_back(f1[j]);
      rec(i, j + 1);
      cur.pop_back();
    }
  };
  rec(0, 0);
  std::sort(out.begin(), out.end());
  return out;
}

// Feasible (no-overtaking) sequences of zone k.
inline std::vector<Sequence> enumerate_feasible(const CoordinatorTables& t, int k) {
  return interleavings(t.segment_order(k, SegmentClass::kRing),
                       t.segment_order(k, SegmentClass::kEntry));
}

// True when f contains each on-road subsequence as an ordered subsequence.
inline bool preserves_road_order(const Sequence& f, const Sequence& f0, const Sequence& f1) {
  if (f.size() != f0.size() + f1.size()) return false;
  std::size_t i = 0, j = 0;
  for (int x : f) {
    if (i < f0.size() && f0[i] == x)
      ++i;
    else if (j < f1.size() && f1[j] == x)
      ++j;
    else
      return false;
  }
  return true;
}

template <class Plans>
struct Selection {
  Sequence sequence;
  double cost = 0.0;
  Plans plans{};
};

// Candidate cost and plans, or nullopt when the candidate is rejected.
template <class Plans>
using SequenceEvaluator = std::function<std::optional<std::pair<double, Plans>>(const Sequence&)>;

struct SelectionStats {
  int evaluated = 0;
  int rejected = 0;
  std::vector<std::pair<Sequence, std::optional<double>>> costs;
};

// Exhaustive evaluation; ties within 1e-9 go to the lexicographically
// smallest sequence. nullopt means every candidate was rejected.
template <class Plans>
std::optional<Selection<Plans>> select_optimal(const std::vector<Sequence>& candidates,
                                               const SequenceEvaluator<Plans>& evaluate,
                                               SelectionStats* stats = nullptr) {
  std::optional<Selection<Plans>> best;
  for (const auto& f : candidates) {
    auto r = evaluate(f);
    if (stats) {
      ++stats->evaluated;
      if (!r) ++stats->rejected;
      stats->costs.push_back({f, r ? std::optional<double>(r->first) : std::nullopt});
    }
    if (!r) continue;
    const double cost = r->first;
    const bool better = !best || cost < best->cost - 1e-9 ||
                        (std::abs(cost - best->cost) <= 1e-9 && f < best->sequence);
    if (better) best = Selection<Plans>{f, cost, std::move(r->second)};
  }
  return best;
}

// Number of pairs ordered differently in a and b (same elements).
inline int inversions(const Sequence& a, const Sequence& b) {
  std::vector<std::size_t> pos(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    pos[i] = static_cast<std::size_t>(std::find(b.begin(), b.end(), a[i]) - b.begin());
  int n = 0;
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = i + 1; j < pos.size(); ++j) n += pos[i] > pos[j];
  return n;
}

// The candidate that keeps the previous relative order of the CAVs it shares
// with `previous`. Newcomers go where they disagree least with `reference`
// (when given); remaining ties by lexicographic order.
inline std::optional<Sequence> retain_previous_order(const std::vector<Sequence>& candidates,
                                                     const Sequence& previous,
                                                     const Sequence& reference = {}) {
  std::optional<Sequence> best;
  int best_inv = 0;
  for (const auto& f : candidates) {
    Sequence shared_f, shared_prev;
    for (int x : f)
      if (std::find(previous.begin(), previous.end(), x) != previous.end()) shared_f.push_back(x);
    for (int x : previous)
      if (std::find(f.begin(), f.end(), x) != f.end()) shared_prev.push_back(x);
    if (shared_f != shared_prev) continue;
    const int inv = reference.size() == f.size() ? inversions(f, reference) : 0;
    if (!best || inv < best_inv) {
      best = f;
      best_inv = inv;
    }
  }
  return best;
}

}  // namespace roundabout
