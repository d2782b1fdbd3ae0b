#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace roundabout {

struct VehicleState {
  double x = 0.0;  // distance from the origin of the current segment [m]
  double v = 0.0;  // [m/s]
};

struct ControlInput {
  double u = 0.0;  // acceleration [m/s^2]
};

struct Limits {
  double v_min = 5.0;
  double v_max = 30.0;
  double u_min = -4.0;
  double u_max = 4.0;
  double phi = 1.8;    // reaction time [s]
  double delta = 0.0;  // standstill margin [m]

  void validate() const {
    if (v_min < 0.0 || !(v_max > v_min))
      throw std::invalid_argument("limits: need 0 <= v_min < v_max");
    if (!(u_min < 0.0) || !(u_max > 0.0))
      throw std::invalid_argument("limits: need u_min < 0 < u_max");
    if (!(phi > 0.0)) throw std::invalid_argument("limits: phi must be > 0");
    if (delta < 0.0) throw std::invalid_argument("limits: delta must be >= 0");
  }

  double clamp(double u) const { return std::clamp(u, u_min, u_max); }
};

// Exact constant-acceleration update over one sample.
constexpr VehicleState step(VehicleState s, ControlInput in, double td) {
  return {s.x + s.v * td + 0.5 * in.u * td * td, s.v + in.u * td};
}

struct Trajectory {
  std::vector<double> x;  // x[h] = position after h+1 samples
  std::vector<double> v;
};

inline Trajectory rollout(VehicleState s0, std::span<const double> controls,
                          double td) {
  if (controls.empty()) throw std::invalid_argument("rollout: empty horizon");
  if (!(td > 0.0)) throw std::invalid_argument("rollout: td must be > 0");
  Trajectory t;
  t.x.reserve(controls.size());
  t.v.reserve(controls.size());
  VehicleState s = s0;
  for (double u : controls) {
    s = step(s, {u}, td);
    t.x.push_back(s.x);
    t.v.push_back(s.v);
  }
  return t;
}

// Scalar affine in the stacked horizon controls: value = coef . u + c.
struct Affine {
  Eigen::VectorXd coef;
  double c = 0.0;

  static Affine constant(int n, double value) {
    return {Eigen::VectorXd::Zero(n), value};
  }
  double eval(const Eigen::VectorXd& u) const { return coef.dot(u) + c; }

  Affine& operator+=(const Affine& o) {
    coef += o.coef;
    c += o.c;
    return *this;
  }
  Affine& operator*=(double k) {
    coef *= k;
    c *= k;
    return *this;
  }
  friend Affine operator+(Affine a, const Affine& b) { return a += b; }
  friend Affine operator-(Affine a, const Affine& b) {
    a.coef -= b.coef;
    a.c -= b.c;
    return a;
  }
  friend Affine operator*(double k, Affine a) { return a *= k; }
  friend Affine operator+(Affine a, double k) {
    a.c += k;
    return a;
  }
  friend Affine operator-(Affine a, double k) {
    a.c -= k;
    return a;
  }
};

struct AffineState {
  Affine x;
  Affine v;
};

// Predicted states s = 0..H as affine functions of u_0..u_{H-1}; state s
// depends on the first s controls only.
inline std::vector<AffineState> lifted_states(VehicleState s0, int horizon,
                                              double td) {
  std::vector<AffineState> out;
  out.reserve(horizon + 1);
  for (int s = 0; s <= horizon; ++s) {
    AffineState a{Affine::constant(horizon, s0.x + s * td * s0.v),
                  Affine::constant(horizon, s0.v)};
    for (int j = 0; j < s; ++j) {
      a.v.coef[j] = td;
      a.x.coef[j] = td * td * (s - j - 0.5);
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace roundabout
