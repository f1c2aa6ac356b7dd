#pragma once

#include <vector>

#include "linalg.hpp"

namespace prtlplan::lp {

enum class Status { Optimal, Infeasible, Unbounded };

struct Result {
  Status status = Status::Infeasible;
  Vec x;
  double objective = 0.0;
};

namespace detail {

// Tableau simplex with Bland's rule. T is m x (ncols+1) with the rhs in the
// last column and rhs >= 0 throughout; basis[i] is the basic column of row i.
// allowed[j] = false bars a column from entering. Returns false on iteration blowup.
inline bool run_simplex(Mat& T, std::vector<int>& basis, const Vec& cost,
                        const std::vector<bool>& allowed, double tol, bool* unbounded) {
  const Eigen::Index m = T.rows();
  const Eigen::Index ncols = T.cols() - 1;
  *unbounded = false;
  const long max_iter = 20000 + 200 * static_cast<long>(m + ncols);
  for (long iter = 0; iter < max_iter; ++iter) {
    // Reduced costs against the current basis.
    Vec cb(m);
    for (Eigen::Index i = 0; i < m; ++i) cb[i] = cost[basis[i]];
    int enter = -1;
    for (Eigen::Index j = 0; j < ncols; ++j) {
      if (!allowed[j]) continue;
      double zj = cost[j] - cb.dot(T.col(j));
      if (zj < -tol) { enter = static_cast<int>(j); break; }
    }
    if (enter < 0) return true;
    int leave = -1;
    double best_ratio = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      double a = T(i, enter);
      if (a <= tol) continue;
      double ratio = T(i, ncols) / a;
      if (leave < 0 || ratio < best_ratio - tol ||
          (std::abs(ratio - best_ratio) <= tol && basis[i] < basis[leave])) {
        leave = static_cast<int>(i);
        best_ratio = ratio;
      }
    }
    if (leave < 0) { *unbounded = true; return true; }
    T.row(leave) /= T(leave, enter);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i == leave) continue;
      double f = T(i, enter);
      if (f != 0.0) T.row(i) -= f * T.row(leave);
    }
    basis[leave] = enter;
  }
  return false;
}

}  // namespace detail

// minimize c'x subject to A x <= b with x free, by a dense two-phase simplex.
inline Result minimize(const Vec& c, const Mat& A, const Vec& b, double tol = 1e-9) {
  const Eigen::Index n = c.size();
  const Eigen::Index m = A.rows();
  if (A.cols() != n || b.size() != m)
    throw std::invalid_argument("lp::minimize: inconsistent dimensions");

  // Columns: x+ (n), x- (n), slack (m), artificial (appended as needed).
  const Eigen::Index base_cols = 2 * n + m;
  std::vector<Eigen::Index> art_rows;
  for (Eigen::Index i = 0; i < m; ++i)
    if (b[i] < 0.0) art_rows.push_back(i);
  const Eigen::Index ncols = base_cols + static_cast<Eigen::Index>(art_rows.size());

  Mat T = Mat::Zero(m, ncols + 1);
  std::vector<int> basis(m, -1);
  for (Eigen::Index i = 0; i < m; ++i) {
    double sgn = b[i] < 0.0 ? -1.0 : 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      T(i, j) = sgn * A(i, j);
      T(i, n + j) = -sgn * A(i, j);
    }
    T(i, 2 * n + i) = sgn;
    T(i, ncols) = sgn * b[i];
    basis[i] = static_cast<int>(2 * n + i);
  }
  for (std::size_t k = 0; k < art_rows.size(); ++k) {
    T(art_rows[k], base_cols + static_cast<Eigen::Index>(k)) = 1.0;
    basis[art_rows[k]] = static_cast<int>(base_cols + static_cast<Eigen::Index>(k));
  }

  std::vector<bool> allowed(ncols, true);
  bool unbounded = false;

  if (!art_rows.empty()) {
    Vec cost1 = Vec::Zero(ncols);
    for (Eigen::Index j = base_cols; j < ncols; ++j) cost1[j] = 1.0;
    if (!detail::run_simplex(T, basis, cost1, allowed, tol, &unbounded))
      throw std::runtime_error("lp::minimize: phase-1 iteration limit");
    double phase1 = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      if (basis[i] >= base_cols) phase1 += T(i, ncols);
    if (phase1 > tol) return {Status::Infeasible, Vec(), 0.0};
    // Pivot leftover artificials out; rows that admit no pivot are redundant.
    for (Eigen::Index i = 0; i < m; ++i) {
      if (basis[i] < base_cols) continue;
      int pivot_col = -1;
      for (Eigen::Index j = 0; j < base_cols; ++j)
        if (std::abs(T(i, j)) > tol) { pivot_col = static_cast<int>(j); break; }
      if (pivot_col < 0) continue;
      T.row(i) /= T(i, pivot_col);
      for (Eigen::Index r = 0; r < m; ++r) {
        if (r == i) continue;
        double f = T(r, pivot_col);
        if (f != 0.0) T.row(r) -= f * T.row(i);
      }
      basis[i] = pivot_col;
    }
    for (Eigen::Index j = base_cols; j < ncols; ++j) allowed[j] = false;
  }

  Vec cost2 = Vec::Zero(ncols);
  for (Eigen::Index j = 0; j < n; ++j) {
    cost2[j] = c[j];
    cost2[n + j] = -c[j];
  }
  if (!detail::run_simplex(T, basis, cost2, allowed, tol, &unbounded))
    throw std::runtime_error("lp::minimize: phase-2 iteration limit");
  if (unbounded) return {Status::Unbounded, Vec(), 0.0};

  Vec y = Vec::Zero(ncols);
  for (Eigen::Index i = 0; i < m; ++i)
    if (basis[i] >= 0 && basis[i] < ncols) y[basis[i]] = T(i, ncols);
  Result res;
  res.status = Status::Optimal;
  res.x = y.segment(0, n) - y.segment(n, n);
  res.objective = c.dot(res.x);
  return res;
}

// Is {x : A x <= b} nonempty (within tol of constraint violation)?
inline bool feasible(const Mat& A, const Vec& b, double tol = 1e-9) {
  Vec c = Vec::Zero(A.cols());
  return minimize(c, A, b, tol).status == Status::Optimal;
}

// argmin over u of ||u - target||_1 subject to H u >= c, via the epigraph form.
inline Result l1_project(const Vec& target, const Mat& H, const Vec& c, double tol = 1e-9) {
  const Eigen::Index n = target.size();
  const Eigen::Index m = H.rows();
  // Variables [u; t]: minimize sum t, with u - t <= target, -u - t <= -target, -H u <= -c.
  Mat A = Mat::Zero(2 * n + m, 2 * n);
  Vec b(2 * n + m);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, i) = 1.0;
    A(i, n + i) = -1.0;
    b[i] = target[i];
    A(n + i, i) = -1.0;
    A(n + i, n + i) = -1.0;
    b[n + i] = -target[i];
  }
  A.block(2 * n, 0, m, n) = -H;
  b.segment(2 * n, m) = -c;
  Vec cost = Vec::Zero(2 * n);
  cost.segment(n, n).setOnes();
  Result inner = minimize(cost, A, b, tol);
  if (inner.status == Status::Optimal) {
    Result out;
    out.status = Status::Optimal;
    out.x = inner.x.segment(0, n);
    out.objective = inner.objective;
    return out;
  }
  return inner;
}

}  // namespace prtlplan::lp
