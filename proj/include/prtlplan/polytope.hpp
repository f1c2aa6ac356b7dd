#pragma once

#include <utility>

#include "linalg.hpp"
#include "lp.hpp"

namespace prtlplan {

// Half-space intersection {z : H z <= g}; kept bounded by always carrying the
// workspace box among the rows.
struct Polytope {
  Mat H;
  Vec g;

  Eigen::Index dim() const { return H.cols(); }
};

inline Polytope box_polytope(const Vec& lo, const Vec& hi) {
  const Eigen::Index n = lo.size();
  if (hi.size() != n) throw std::invalid_argument("box_polytope: bound sizes differ");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(lo[i] <= hi[i])) throw std::invalid_argument("box_polytope: empty box");
  Mat H = Mat::Zero(2 * n, n);
  Vec g(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    H(i, i) = 1.0;
    g[i] = hi[i];
    H(n + i, i) = -1.0;
    g[n + i] = -lo[i];
  }
  return {H, g};
}

inline Polytope intersect(const Polytope& a, const Polytope& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("intersect: dimension mismatch");
  Polytope out;
  out.H = Mat(a.H.rows() + b.H.rows(), a.dim());
  out.H << a.H, b.H;
  out.g = Vec(a.g.size() + b.g.size());
  out.g << a.g, b.g;
  return out;
}

inline bool is_empty(const Polytope& p, double tol = 1e-9) {
  return !lp::feasible(p.H, p.g, tol);
}

inline bool polytopes_intersect(const Polytope& a, const Polytope& b, double tol = 1e-9) {
  return !is_empty(intersect(a, b), tol);
}

inline bool contains(const Polytope& p, const Vec& z, double tol = 1e-9) {
  return ((p.H * z - p.g).array() <= tol).all();
}

// Axis-aligned bounding box by 2n support LPs; requires nonempty p.
inline std::pair<Vec, Vec> bounding_box(const Polytope& p) {
  const Eigen::Index n = p.dim();
  Vec lo(n), hi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec c = Vec::Zero(n);
    c[i] = 1.0;
    auto rmin = lp::minimize(c, p.H, p.g);
    auto rmax = lp::minimize(Vec(-c), p.H, p.g);
    if (rmin.status != lp::Status::Optimal || rmax.status != lp::Status::Optimal)
      throw std::invalid_argument("bounding_box: polytope empty or unbounded");
    lo[i] = rmin.objective;
    hi[i] = -rmax.objective;
  }
  return {lo, hi};
}

}  // namespace prtlplan
