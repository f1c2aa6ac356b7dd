#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace prtlplan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const Mat& m, double tol = 1e-9) {
  if (m.rows() != m.cols()) return false;
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline double min_eigenvalue(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Symmetrize and clamp eigenvalues to zero; eigenvalues below -neg_tol are an error.
inline Mat clamp_psd(const Mat& m, double neg_tol = 1e-9) {
  Mat s = symmetrize(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  Vec ev = es.eigenvalues();
  if (ev.minCoeff() < -neg_tol)
    throw std::invalid_argument("matrix is not positive semidefinite (min eigenvalue " +
                                std::to_string(ev.minCoeff()) + ")");
  bool clipped = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] < 0.0) { ev[i] = 0.0; clipped = true; }
  if (!clipped) return s;
  return symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

// Symmetric square root of a PSD matrix via eigendecomposition.
inline Mat psd_sqrt(const Mat& m, double neg_tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
  Vec ev = es.eigenvalues();
  if (ev.minCoeff() < -neg_tol)
    throw std::invalid_argument("psd_sqrt: matrix is not positive semidefinite");
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
  return symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

// Lower-triangular Cholesky factor tolerating semidefinite input: a nonpositive
// pivot zeroes its column instead of failing.
inline Mat psd_cholesky_lower(const Mat& m) {
  const Eigen::Index n = m.rows();
  Mat l = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= 0.0) continue;
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

// b - a is PSD up to tol.
inline bool psd_leq(const Mat& a, const Mat& b, double tol = 0.0) {
  return min_eigenvalue(b - a) >= -tol;
}

// Half-vectorization of a lower-triangular matrix, column-major over the lower part.
inline Vec vech(const Mat& l) {
  const Eigen::Index n = l.rows();
  Vec v(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) v[k++] = l(i, j);
  return v;
}

inline Mat unvech(const Vec& v, Eigen::Index n) {
  Mat l = Mat::Zero(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) l(i, j) = v[k++];
  return l;
}

}  // namespace prtlplan
