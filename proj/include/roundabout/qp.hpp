#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace roundabout::qp {

// minimize 0.5 u'Pu + q'u
// s.t.     rows * u + offsets >= 0
//          lower <= u <= upper      (entries may be infinite)
struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Eigen::MatrixXd rows;
  Eigen::VectorXd offsets;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<std::string> tags;  // optional, one per row

  QpProblem() = default;
  explicit QpProblem(int n)
      : hessian(Eigen::MatrixXd::Zero(n, n)),
        linear(Eigen::VectorXd::Zero(n)),
        rows(0, n),
        offsets(0),
        lower(Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity())),
        upper(Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity())) {}

  int size() const { return static_cast<int>(linear.size()); }
  int row_count() const { return static_cast<int>(rows.rows()); }

  void add_row(const Eigen::VectorXd& coef, double offset, std::string tag = {}) {
    const auto m = rows.rows();
    rows.conservativeResize(m + 1, Eigen::NoChange);
    rows.row(m) = coef.transpose();
    offsets.conservativeResize(m + 1);
    offsets[m] = offset;
    tags.push_back(std::move(tag));
  }

  void validate() const {
    const auto n = linear.size();
    if (hessian.rows() != n || hessian.cols() != n)
      throw std::invalid_argument("qp: hessian dimension mismatch");
    if (rows.cols() != n || rows.rows() != offsets.size())
      throw std::invalid_argument("qp: constraint dimension mismatch");
    if (lower.size() != n || upper.size() != n)
      throw std::invalid_argument("qp: bound dimension mismatch");
  }

  double objective(const Eigen::VectorXd& u) const {
    return 0.5 * u.dot(hessian * u) + linear.dot(u);
  }

  // Largest violation over rows and bounds; zero when feasible.
  double max_violation(const Eigen::VectorXd& u) const {
    double worst = 0.0;
    if (rows.rows() > 0) {
      const Eigen::VectorXd s = rows * u + offsets;
      worst = std::max(worst, -s.minCoeff());
    }
    for (int i = 0; i < size(); ++i) {
      worst = std::max(worst, lower[i] - u[i]);
      worst = std::max(worst, u[i] - upper[i]);
    }
    return worst;
  }
};

enum class Status { Optimal, Infeasible, MaxIter };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::MaxIter: return "max_iter";
  }
  return "?";
}

struct QpSolution {
  Status status = Status::MaxIter;
  Eigen::VectorXd u;
  double objective = std::numeric_limits<double>::infinity();
  // Multipliers in the order: rows, then lower bounds, then upper bounds.
  Eigen::VectorXd multipliers;
  // Infeasible: active constraints plus the violated one that could not be
  // added (same indexing as multipliers).
  std::vector<int> evidence;
  int iterations = 0;

  bool ok() const { return status == Status::Optimal; }
};

namespace detail {

// Dual active-set solver for strictly convex problems with inequality
// constraints c_i'x + b_i >= 0 stored as columns of C.
class DualActiveSet {
 public:
  DualActiveSet(const Eigen::MatrixXd& G, const Eigen::VectorXd& g0,
                const Eigen::MatrixXd& C, const Eigen::VectorXd& b)
      : n_(static_cast<int>(g0.size())), C_(C), b_(b) {
    Eigen::MatrixXd H = 0.5 * (G + G.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
      const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
      H.diagonal().array() += 1e-10 * scale;
      llt.compute(H);
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument("qp: hessian is not positive semidefinite");
    }
    const Eigen::MatrixXd L = llt.matrixL();
    J_ = L.transpose().triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(n_, n_));
    R_ = Eigen::MatrixXd::Zero(n_, n_);
    x_ = -llt.solve(g0);
    g0_ = g0;
  }

  QpSolution run(int max_iter) {
    const int m = static_cast<int>(C_.cols());
    std::vector<bool> is_active(m, false);
    QpSolution sol;
    int it = 0;
    while (true) {
      // Step 1: pick the most violated inactive constraint.
      int p = -1;
      double sp = 0.0;
      for (int i = 0; i < m; ++i) {
        if (is_active[i]) continue;
        const double s = C_.col(i).dot(x_) + b_[i];
        const double tol = kFeasTol * (1.0 + std::abs(b_[i]));
        if (s < -tol && (p < 0 || s < sp)) {
          p = i;
          sp = s;
        }
      }
      if (p < 0) return finish(sol, Status::Optimal, it);

      double u_plus = 0.0;
      while (true) {
        if (++it > max_iter) return finish(sol, Status::MaxIter, it);
        const Eigen::VectorXd np = C_.col(p);
        sp = np.dot(x_) + b_[p];
        Eigen::VectorXd d = J_.transpose() * np;
        const int q = static_cast<int>(active_.size());
        Eigen::VectorXd z = J_.rightCols(n_ - q) * d.tail(n_ - q);
        Eigen::VectorXd r(q);
        if (q > 0)
          r = R_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

        // Partial (dual) step length.
        double t1 = kInf;
        int l = -1;
        for (int j = 0; j < q; ++j) {
          if (r[j] > kDirTol && mult_[j] / r[j] < t1) {
            t1 = mult_[j] / r[j];
            l = j;
          }
        }
        // Full (primal) step length.
        const double zn = z.dot(np);
        const double t2 = (z.norm() <= kDirTol * (1.0 + np.norm()) || zn <= 0.0)
                              ? kInf
                              : -sp / zn;
        const double t = std::min(t1, t2);
        if (t == kInf) {
          sol.evidence = active_;
          sol.evidence.push_back(p);
          return finish(sol, Status::Infeasible, it);
        }
        if (t2 == kInf) {
          for (int j = 0; j < q; ++j) mult_[j] -= t * r[j];
          u_plus += t;
          is_active[active_[l]] = false;
          drop(l);
          continue;
        }
        x_ += t * z;
        for (int j = 0; j < q; ++j) mult_[j] -= t * r[j];
        u_plus += t;
        if (t == t2) {
          if (!add(d)) {
            sol.evidence = active_;
            sol.evidence.push_back(p);
            return finish(sol, Status::Infeasible, it);
          }
          active_.push_back(p);
          mult_.push_back(u_plus);
          is_active[p] = true;
          break;
        }
        is_active[active_[l]] = false;
        drop(l);
      }
    }
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  static constexpr double kFeasTol = 1e-11;
  static constexpr double kDirTol = 1e-14;

  QpSolution finish(QpSolution& sol, Status st, int it) {
    sol.status = st;
    sol.iterations = it;
    sol.u = x_;
    sol.multipliers = Eigen::VectorXd::Zero(C_.cols());
    for (std::size_t j = 0; j < active_.size(); ++j)
      sol.multipliers[active_[j]] = mult_[j];
    return sol;
  }

  // Rotate d so that entries below the new active position vanish, then
  // append it as the next column of R.
  bool add(Eigen::VectorXd& d) {
    const int q = static_cast<int>(active_.size());
    for (int j = n_ - 1; j > q; --j) {
      const double a = d[j - 1], bb = d[j];
      const double h = std::hypot(a, bb);
      if (h == 0.0) continue;
      const double cc = a / h, ss = bb / h;
      d[j - 1] = h;
      d[j] = 0.0;
      const Eigen::VectorXd c0 = J_.col(j - 1), c1 = J_.col(j);
      J_.col(j - 1) = cc * c0 + ss * c1;
      J_.col(j) = -ss * c0 + cc * c1;
    }
    R_.col(q).head(q + 1) = d.head(q + 1);
    if (std::abs(d[q]) <= std::numeric_limits<double>::epsilon() * r_norm_)
      return false;
    r_norm_ = std::max(r_norm_, std::abs(d[q]));
    return true;
  }

  void drop(int l) {
    const int q = static_cast<int>(active_.size());
    active_.erase(active_.begin() + l);
    mult_.erase(mult_.begin() + l);
    for (int k = l; k < q - 1; ++k) R_.col(k) = R_.col(k + 1);
    R_.col(q - 1).setZero();
    for (int j = l; j < q - 1; ++j) {
      const double a = R_(j, j), bb = R_(j + 1, j);
      const double h = std::hypot(a, bb);
      if (h == 0.0) continue;
      const double cc = a / h, ss = bb / h;
      for (int k = j; k < q - 1; ++k) {
        const double r0 = R_(j, k), r1 = R_(j + 1, k);
        R_(j, k) = cc * r0 + ss * r1;
        R_(j + 1, k) = -ss * r0 + cc * r1;
      }
      R_(j + 1, j) = 0.0;
      const Eigen::VectorXd c0 = J_.col(j), c1 = J_.col(j + 1);
      J_.col(j) = cc * c0 + ss * c1;
      J_.col(j + 1) = -ss * c0 + cc * c1;
    }
  }

  int n_;
  const Eigen::MatrixXd& C_;
  const Eigen::VectorXd& b_;
  Eigen::MatrixXd J_, R_;
  Eigen::VectorXd x_, g0_;
  std::vector<int> active_;
  std::vector<double> mult_;
  double r_norm_ = 1.0;
};

}  // namespace detail

inline QpSolution solve(const QpProblem& problem) {
  problem.validate();
  const int n = problem.size();
  const int m = problem.row_count();

  std::vector<int> lo_idx, up_idx;
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(problem.lower[i])) lo_idx.push_back(i);
    if (std::isfinite(problem.upper[i])) up_idx.push_back(i);
  }
  const int total = m + static_cast<int>(lo_idx.size() + up_idx.size());
  Eigen::MatrixXd C(n, total);
  Eigen::VectorXd b(total);
  if (m > 0) {
    C.leftCols(m) = problem.rows.transpose();
    b.head(m) = problem.offsets;
  }
  int col = m;
  for (int i : lo_idx) {
    C.col(col).setZero();
    C(i, col) = 1.0;
    b[col++] = -problem.lower[i];
  }
  for (int i : up_idx) {
    C.col(col).setZero();
    C(i, col) = -1.0;
    b[col++] = problem.upper[i];
  }

  detail::DualActiveSet solver(problem.hessian, problem.linear, C, b);
  QpSolution raw = solver.run(50 * (n + total) + 100);

  // Map bound multipliers back to the rows / lower / upper layout.
  QpSolution sol = raw;
  sol.multipliers = Eigen::VectorXd::Zero(m + 2 * n);
  sol.multipliers.head(m) = raw.multipliers.head(m);
  auto remap = [&](int c) {
    if (c < m) return c;
    c -= m;
    if (c < static_cast<int>(lo_idx.size())) return m + lo_idx[c];
    return m + n + up_idx[c - lo_idx.size()];
  };
  for (int c = m; c < total; ++c) sol.multipliers[remap(c)] = raw.multipliers[c];
  for (int& e : sol.evidence) e = remap(e);
  sol.objective = problem.objective(sol.u);
  return sol;
}

// Norm of P u + q - sum_i lambda_i grad_i over all constraints.
inline double kkt_residual(const QpProblem& problem, const QpSolution& sol) {
  const int n = problem.size();
  const int m = problem.row_count();
  Eigen::VectorXd g = problem.hessian * sol.u + problem.linear;
  if (m > 0) g -= problem.rows.transpose() * sol.multipliers.head(m);
  g -= sol.multipliers.segment(m, n);
  g += sol.multipliers.segment(m + n, n);
  return g.norm();
}

}  // namespace roundabout::qp
