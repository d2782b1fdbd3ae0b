#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "roundabout/dynamics.hpp"

namespace roundabout {

// Linear class-K coefficients [1/s] for the speed-limit, rear-end and merging
// barriers.
struct ClassKConfig {
  double gamma_vmax = 1.0;
  double gamma_vmin = 1.0;
  double gamma_rear = 1.0;
  double gamma_merge = 1.0;

  void validate() const {
    if (!(gamma_vmax > 0 && gamma_vmin > 0 && gamma_rear > 0 && gamma_merge > 0))
      throw std::invalid_argument("class-K coefficients must be > 0");
  }
};

// coef . u + offset >= 0 over the stacked horizon controls.
struct ConstraintRow {
  Eigen::VectorXd coef;
  double offset = 0.0;
  std::string tag;

  double eval(const Eigen::VectorXd& u) const { return coef.dot(u) + offset; }
  // Largest admissible u_h when every other control is zero and the
  // coefficient on u_h is negative (convenient for scalar checks).
  double upper_bound_on(int h) const { return offset / -coef[h]; }
  double lower_bound_on(int h) const { return -offset / coef[h]; }
};

// Position/speed of a neighbour at the start of a sample, plus the
// acceleration it applies during that sample. Positions are already in the
// frame the row is built in.
struct NeighborSample {
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
};

struct ClbfParams {
  double p = 1.0;
  double q = 1.0;
  int n = 0;  // q = 1/(2n+1); n = 0 encodes q = 1
  double t_m = 0.0;

  bool linear() const { return n == 0; }
};

// Real odd root: sign(w) |w|^(1/(2n+1)).
inline double odd_root(double w, int n) {
  const double q = 1.0 / (2.0 * n + 1.0);
  return std::copysign(std::pow(std::abs(w), q), w);
}

// w^(1-q) with w^q the real odd root; always >= 0.
inline double odd_power_one_minus_q(double w, int n) {
  return std::pow(std::abs(odd_root(w, n)), 2.0 * n);
}

// Barrier values on plain numbers.
inline double rear_end_barrier(double x, double v, double x_leader, const Limits& lim) {
  return x_leader - x - lim.phi * v - lim.delta;
}

inline double merge_barrier(double x, double v, double x_im, double segment_length,
                            const Limits& lim) {
  return x_im - x - lim.phi / segment_length * x_im * v - lim.delta;
}

// Time derivative of the merging barrier for a given own control.
inline double merge_barrier_rate(double v, double x_im, double v_im, double u,
                                 double segment_length, const Limits& lim) {
  const double k = lim.phi / segment_length;
  return v_im - v - k * x_im * u - k * v_im * v;
}

// bbar = (phi/L) x_im u_min + (phi/L) v_im v + v - v_im, i.e. minus the
// largest barrier rate reachable with admissible braking.
inline double merge_bbar(double v, double x_im, double v_im, double segment_length,
                         const Limits& lim) {
  const double k = lim.phi / segment_length;
  return k * x_im * lim.u_min + k * v_im * v + v - v_im;
}

namespace detail {

inline Eigen::VectorXd unit(int n, int h, double value) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e[h] = value;
  return e;
}

// The sampled-data correction keeps (b_{h+1} - b_h)/T >= -gamma b_h exact
// for piecewise-constant controls; it needs gamma T <= 1.
inline double effective_gamma(double gamma, double sample) {
  return sample > 0.0 ? std::min(gamma, 1.0 / sample) : gamma;
}

inline ConstraintRow finish(Affine expr, std::string tag) {
  return {std::move(expr.coef), expr.c, std::move(tag)};
}

}  // namespace detail

// -u_h + g1 (v_max - v_h) >= 0 and u_h + g2 (v_h - v_min) >= 0.
// `sample` > 0 selects the sampled-data form (identical here, but the class-K
// gain is capped at 1/sample).
inline std::pair<ConstraintRow, ConstraintRow> row_vlimits(const AffineState& s, int h,
                                                           const Limits& lim,
                                                           const ClassKConfig& k,
                                                           double sample = 0.0) {
  const int n = static_cast<int>(s.v.coef.size());
  const double g1 = detail::effective_gamma(k.gamma_vmax, sample);
  const double g2 = detail::effective_gamma(k.gamma_vmin, sample);
  Affine upper = g1 * (Affine::constant(n, lim.v_max) - s.v);
  upper.coef += detail::unit(n, h, -1.0);
  Affine lower = g2 * (s.v - lim.v_min);
  lower.coef += detail::unit(n, h, 1.0);
  return {detail::finish(std::move(upper), "vmax@" + std::to_string(h)),
          detail::finish(std::move(lower), "vmin@" + std::to_string(h))};
}

// v_p - v_h - phi u_h + g3 (x_p - x_h - phi v_h - delta) >= 0, plus the
// term T/2 (a_p - u_h) in sampled-data form.
inline ConstraintRow row_rear_end(const AffineState& s, const NeighborSample& leader, int h,
                                  const Limits& lim, double gamma, double sample = 0.0) {
  const int n = static_cast<int>(s.v.coef.size());
  const double g = detail::effective_gamma(gamma, sample);
  Affine b3 = Affine::constant(n, leader.x - lim.delta) - s.x - lim.phi * s.v;
  Affine row = Affine::constant(n, leader.v) - s.v + g * b3;
  row.coef[h] -= lim.phi;
  if (sample > 0.0) {
    row.c += 0.5 * sample * leader.a;
    row.coef[h] -= 0.5 * sample;
  }
  return detail::finish(std::move(row), "rear@" + std::to_string(h));
}

namespace detail {

// Lie-derivative part of the merging row (everything except the class-K
// term), with the sampled-data correction when sample > 0.
inline Affine merge_lie_terms(const AffineState& s, const NeighborSample& im, int h,
                              const Limits& lim, double segment_length, double sample) {
  const int n = static_cast<int>(s.v.coef.size());
  const double k = lim.phi / segment_length;
  Affine row = Affine::constant(n, im.v) - s.v - k * im.v * s.v;
  row.coef[h] -= k * im.x;
  if (sample > 0.0) {
    const double T = sample;
    row.c += 0.5 * T * im.a;
    row.coef[h] -= 0.5 * T;
    row = row - k * (0.5 * im.a * T) * s.v;
    row.coef[h] -= k * (im.v * T + 0.5 * im.a * T * T);
  }
  return row;
}

inline Affine merge_barrier_affine(const AffineState& s, const NeighborSample& im,
                                   const Limits& lim, double segment_length) {
  const int n = static_cast<int>(s.v.coef.size());
  const double k = lim.phi / segment_length;
  return Affine::constant(n, im.x - lim.delta) - s.x - (k * im.x) * s.v;
}

}  // namespace detail

// Continuous merging form with a linear class-K term.
inline ConstraintRow row_merge_cbf(const AffineState& s, const NeighborSample& im, int h,
                                   const Limits& lim, double segment_length, double gamma,
                                   double sample = 0.0) {
  const double g = detail::effective_gamma(gamma, sample);
  Affine row = detail::merge_lie_terms(s, im, h, lim, segment_length, sample) +
               g * detail::merge_barrier_affine(s, im, lim, segment_length);
  return detail::finish(std::move(row), "merge@" + std::to_string(h));
}

// Merging row with the p * b4^q term. For q = 1 this is the CBF row with
// gamma = p; otherwise b4^q is evaluated at `nominal_b4` so the row stays
// affine in the controls.
inline ConstraintRow row_merge_clbf(const AffineState& s, const NeighborSample& im,
                                    const ClbfParams& params, double nominal_b4, int h,
                                    const Limits& lim, double segment_length,
                                    double sample = 0.0) {
  if (params.linear())
    return row_merge_cbf(s, im, h, lim, segment_length, params.p, sample);
  Affine row = detail::merge_lie_terms(s, im, h, lim, segment_length, sample);
  row.c += params.p * odd_root(nominal_b4, params.n);
  return detail::finish(std::move(row), "clbf@" + std::to_string(h));
}

// Upper bound on the time to reach b4 >= 0 from b4_0 < 0 under
// b4' >= -p b4^q.
inline double t_conv(double b4_0, double p, int n) {
  if (!(p > 0.0)) throw std::invalid_argument("t_conv: p must be > 0");
  if (n < 1) throw std::invalid_argument("t_conv: q must be 1/(2n+1) with n >= 1");
  const double q = 1.0 / (2.0 * n + 1.0);
  return odd_power_one_minus_q(b4_0, n) / (p * (1.0 - q));
}

struct PqInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool empty() const { return !(lower <= upper) || !(upper > 0.0); }
};

// Admissible p for q = 1/(2n+1): [b4^(1-q) / ((1-q) t_m), bbar / b4^q].
inline PqInterval pq_interval(double b4_0, double bbar_0, double t_m, int n) {
  const double q = 1.0 / (2.0 * n + 1.0);
  return {odd_power_one_minus_q(b4_0, n) / ((1.0 - q) * t_m), bbar_0 / odd_root(b4_0, n)};
}

// nullopt signals that no admissible (p, q) exists and the sequence must be
// rejected.
inline std::optional<ClbfParams> choose_pq(double b4_0, double b4dot_0, double bbar_0,
                                           double t_m, int n = 1, double p_default = 1.0) {
  if (b4_0 >= 0.0) return ClbfParams{p_default, 1.0, 0, t_m};
  if (b4dot_0 < 0.0) return std::nullopt;
  if (!(t_m > 0.0)) return std::nullopt;
  const PqInterval iv = pq_interval(b4_0, bbar_0, t_m, n);
  if (iv.empty()) return std::nullopt;
  return ClbfParams{0.5 * (iv.lower + iv.upper), 1.0 / (2.0 * n + 1.0), n, t_m};
}

}  // namespace roundabout
