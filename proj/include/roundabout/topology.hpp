#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace roundabout {

// Control zones are numbered 1..n_cz counterclockwise. Each zone owns two
// segments of equal length feeding its merging point: the entry road
// (class 1) and the ring segment (class 0).
struct SegmentClass {
  static constexpr int kRing = 0;
  static constexpr int kEntry = 1;
};

struct Route {
  int entry_cz = 1;
  int exit_cz = 1;
  std::vector<int> zones;  // entry_cz first, exit_cz last

  // Total path length from the start of the entry road to the exit point.
  double length(double segment_length) const {
    return segment_length * static_cast<double>(zones.size());
  }
};

class RoundaboutTopology {
 public:
  RoundaboutTopology() = default;
  RoundaboutTopology(int n_cz, double segment_length)
      : n_cz_(n_cz), length_(segment_length) {
    if (n_cz < 2) throw std::invalid_argument("topology: n_cz must be >= 2");
    if (!(segment_length > 0.0))
      throw std::invalid_argument("topology: segment length must be > 0");
  }

  int n_cz() const { return n_cz_; }
  double segment_length() const { return length_; }

  bool valid_cz(int k) const { return k >= 1 && k <= n_cz_; }

  // Zone reached after crossing the merging point of zone k.
  int next_cz(int k) const {
    check(k, "next_cz");
    return k % n_cz_ + 1;
  }

  // Counterclockwise zone count from `from` to `to`.
  int cz_offset(int from, int to) const {
    check(from, "cz_offset");
    check(to, "cz_offset");
    return ((to - from) % n_cz_ + n_cz_) % n_cz_;
  }

  // Gap from follower to leader once the leader position is expressed in
  // the follower's segment frame, `offset` segments downstream.
  double adjusted_gap(double x_follower, double x_leader, int offset) const {
    if (offset < 0) throw std::invalid_argument("adjusted_gap: negative offset");
    if (x_follower < 0.0 || x_follower > length_ || x_leader < 0.0 ||
        x_leader > length_)
      throw std::invalid_argument("adjusted_gap: position outside segment");
    return x_leader + length_ * offset - x_follower;
  }

  // Entry road of entry_cz, then the ring segment of each following zone up
  // to and including exit_cz. entry == exit is a full loop.
  Route make_route(int entry_cz, int exit_cz) const {
    check(entry_cz, "make_route");
    check(exit_cz, "make_route");
    Route r{entry_cz, exit_cz, {entry_cz}};
    int k = entry_cz;
    do {
      k = next_cz(k);
      r.zones.push_back(k);
    } while (k != exit_cz);
    return r;
  }

 private:
  void check(int k, const char* what) const {
    if (!valid_cz(k))
      throw std::invalid_argument(std::string(what) + ": zone index " +
                                  std::to_string(k) + " out of range");
  }

  int n_cz_ = 3;
  double length_ = 60.0;
};

}  // namespace roundabout
