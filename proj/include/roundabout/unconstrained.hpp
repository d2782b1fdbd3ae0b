#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace roundabout {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// u(t) = a t + b,  v(t) = a t^2/2 + b t + c,  x(t) = a t^3/6 + b t^2/2 + c t + d
// in absolute time, with x measured from the position at t0.
struct PolyTrajectory {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  double t0 = 0.0, tf = 0.0;
  double distance = 0.0;
  double beta = 0.0;

  double u(double t) const { return a * t + b; }
  double v(double t) const { return 0.5 * a * t * t + b * t + c; }
  double x(double t) const { return a * t * t * t / 6.0 + 0.5 * b * t * t + c * t + d; }

  // beta * (tf - t0) + integral of u^2 / 2.
  double cost() const {
    const double T = tf - t0;
    return beta * T + a * a * T * T * T / 6.0;
  }
};

struct TrajectorySample {
  double u = 0.0, v = 0.0, x = 0.0;
};

inline TrajectorySample eval(const PolyTrajectory& p, double t) {
  const double slack = 1e-9 * (1.0 + std::abs(p.tf));
  if (t < p.t0 - slack || t > p.tf + slack)
    throw std::invalid_argument("eval: time outside [t0, tf]");
  return {p.u(t), p.v(t), p.x(t)};
}

// Like eval, but continues at constant speed v(tf) with zero control after
// the trajectory completes.
inline TrajectorySample eval_extended(const PolyTrajectory& p, double t) {
  if (t <= p.tf) return eval(p, std::max(t, p.t0));
  const double vf = p.v(p.tf);
  return {0.0, vf, p.distance + vf * (t - p.tf)};
}

// Residuals of the five boundary / optimality conditions.
struct UnconstrainedResiduals {
  double initial_speed, initial_position, final_position, final_control, hamiltonian;
  double max_abs() const {
    return std::max({std::abs(initial_speed), std::abs(initial_position),
                     std::abs(final_position), std::abs(final_control),
                     std::abs(hamiltonian)});
  }
};

inline UnconstrainedResiduals residuals(const PolyTrajectory& p, double v0) {
  const double t0 = p.t0, tf = p.tf;
  return {
      0.5 * p.a * t0 * t0 + p.b * t0 + p.c - v0,
      p.a * t0 * t0 * t0 / 6.0 + 0.5 * p.b * t0 * t0 + p.c * t0 + p.d,
      p.a * tf * tf * tf / 6.0 + 0.5 * p.b * tf * tf + p.c * tf + p.d - p.distance,
      p.a * tf + p.b,
      p.beta + 0.5 * p.a * p.a * tf * tf + p.a * p.b * tf + p.a * p.c,
  };
}

namespace detail {

// In shifted time tau = t - t0 with duration T: eliminating b = -aT and the
// terminal position gives a(T) = 3 (v0 T - D) / T^3, leaving the scalar
// stationarity condition g(T) = beta - a^2 T^2 / 2 + a v0 = 0.
struct DurationEquation {
  double v0, distance, beta;

  double accel(double T) const { return 3.0 * (v0 * T - distance) / (T * T * T); }
  double g(double T) const {
    const double a = accel(T);
    return beta - 0.5 * a * a * T * T + a * v0;
  }
  double dg(double T) const {
    const double a = accel(T);
    const double da = (9.0 * distance - 6.0 * v0 * T) / (T * T * T * T);
    return -a * da * T * T - a * a * T + da * v0;
  }
};

}  // namespace detail

inline PolyTrajectory solve_unconstrained(double t0, double v0, double distance,
                                          double beta, double v_min = 0.0) {
  if (!(distance > 0.0)) throw std::invalid_argument("solve_unconstrained: distance must be > 0");
  if (beta < 0.0) throw std::invalid_argument("solve_unconstrained: beta must be >= 0");
  if (!(v0 > 0.0) && !(beta > 0.0))
    throw std::invalid_argument("solve_unconstrained: need v0 > 0 or beta > 0");

  PolyTrajectory p;
  p.t0 = t0;
  p.distance = distance;
  p.beta = beta;

  double T = 0.0, a = 0.0;
  if (beta == 0.0) {
    T = distance / v0;
  } else {
    const detail::DurationEquation eq{std::max(v0, 0.0), distance, beta};
    const double v_eff = std::max(v_min, 0.1);
    double hi = distance / std::max(v0, v_eff);
    int grow = 0;
    while (eq.g(hi) <= 0.0 && grow++ < 60) hi *= 2.0;
    if (eq.g(hi) <= 0.0)
      throw SolverError("solve_unconstrained: no sign change above the root");
    double lo = 0.5 * hi;
    int shrink = 0;
    while (eq.g(lo) >= 0.0 && shrink++ < 200) lo *= 0.5;
    if (eq.g(lo) >= 0.0)
      throw SolverError("solve_unconstrained: no sign change below the root");

    T = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const double gT = eq.g(T);
      if (gT == 0.0) break;
      (gT < 0.0 ? lo : hi) = T;
      const double slope = eq.dg(T);
      double next = slope != 0.0 ? T - gT / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - T) <= 1e-15 * T) {
        T = next;
        break;
      }
      T = next;
    }
    a = eq.accel(T);
  }

  // Shifted-time coefficients, then re-expressed in absolute time.
  const double b_rel = -a * T;
  p.a = a;
  p.b = b_rel - a * t0;
  p.c = 0.5 * a * t0 * t0 - b_rel * t0 + v0;
  p.d = -(a * t0 * t0 * t0 / 6.0 + 0.5 * p.b * t0 * t0 + p.c * t0);
  p.tf = t0 + T;
  return p;
}

}  // namespace roundabout
