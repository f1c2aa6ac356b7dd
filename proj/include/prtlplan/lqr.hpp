#pragma once

#include <vector>

#include "belief.hpp"
#include "lp.hpp"

namespace prtlplan {

// Infinite-horizon discrete LQR gain via Riccati fixed point. The iterate delta
// equals the DARE residual of the previous iterate, so convergence below 1e-8
// certifies the equation itself.
inline Mat lqr(const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m ||
      R.cols() != m)
    throw std::invalid_argument("lqr: dimension mismatch");
  if (!is_symmetric(Q) || min_eigenvalue(Q) < -1e-9)
    throw std::invalid_argument("lqr: Q must be symmetric PSD");
  if (!is_symmetric(R) || min_eigenvalue(R) <= 0.0)
    throw std::invalid_argument("lqr: R must be symmetric positive definite");
  Mat P = symmetrize(Q);
  for (int it = 0; it < 10000; ++it) {
    const Mat BtP = B.transpose() * P;
    const Mat F = (R + BtP * B).ldlt().solve(BtP * A);
    const Mat Pn = symmetrize(Q + A.transpose() * P * (A - B * F));
    const double residual = (Pn - P).cwiseAbs().maxCoeff();
    P = Pn;
    if (residual < 1e-8) return (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
  }
  throw std::runtime_error("lqr: Riccati iteration did not converge");
}

// Nearest admissible control in L1: argmin |u - u_des|_1 s.t. Hu u >= cu.
inline Vec clamp_control(const Vec& u_des, const Mat& Hu, const Vec& cu) {
  if (((Hu * u_des - cu).array() >= 0.0).all()) return u_des;
  lp::Result r = lp::l1_project(u_des, Hu, cu);
  if (r.status != lp::Status::Optimal)
    throw std::invalid_argument("clamp_control: input set is empty");
  return r.x;
}

struct LoopControls {
  std::vector<Vec> controls;  // u_0..u_{n-1}, already clamped admissible
  double residual = 0.0;      // post-clamp |C u - (mu_final - A^n mu_near)|_inf
};

// Minimum-norm n-step mean steering onto mu_final through the controllability
// matrix [A^{n-1}B ... AB B]; requires full row rank.
inline LoopControls loop_controls(const LinearSystem& sys, const Vec& mu_near,
                                  const Vec& mu_final) {
  const Eigen::Index n = sys.A.rows();
  const Eigen::Index m = sys.B.cols();
  if (mu_near.size() != n || mu_final.size() != n)
    throw std::invalid_argument("loop_controls: dimension mismatch");
  Mat ctrb(n, n * m);
  Mat power = Mat::Identity(n, n);  // A^{n-1-j} built right-to-left
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    ctrb.block(0, j * m, n, m) = power * sys.B;
    power = sys.A * power;
  }
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(ctrb);
  if (cod.rank() < n)
    throw std::invalid_argument("loop_controls: controllability matrix is row-rank deficient");
  const Vec target = mu_final - power * mu_near;  // power == A^n after the loop
  const Vec stacked = cod.solve(target);

  LoopControls out;
  Vec clamped(n * m);
  for (Eigen::Index j = 0; j < n; ++j) {
    Vec u = clamp_control(stacked.segment(j * m, m), sys.Hu, sys.cu);
    out.controls.push_back(u);
    clamped.segment(j * m, m) = u;
  }
  out.residual = (ctrb * clamped - target).cwiseAbs().maxCoeff();
  return out;
}

// Augmented belief coordinates [mu; vech(chol(Sigma))]: perturbing any entry
// keeps the reconstructed covariance PSD, which makes finite differencing safe.
inline Eigen::Index aug_dim(Eigen::Index n) { return n + n * (n + 1) / 2; }

inline Vec belief_to_aug(const BeliefState& b) {
  const Eigen::Index n = b.mean.size();
  Vec s(aug_dim(n));
  s.head(n) = b.mean;
  s.tail(n * (n + 1) / 2) = vech(psd_cholesky_lower(clamp_psd(b.cov)));
  return s;
}

inline BeliefState aug_to_belief(const Vec& s, Eigen::Index n) {
  const Mat l = unvech(s.tail(n * (n + 1) / 2), n);
  return make_belief(s.head(n), symmetrize(l * l.transpose()));
}

// Time-varying belief-LQR gains: central finite differences (step 1e-6) of the
// augmented MLO step about the nominal run, then a backward Riccati recursion
// with stage cost s'Qs + u'Ru and terminal Qf.
inline std::vector<Mat> blqr(const LinearSystem& sys, const std::vector<BeliefState>& nominal,
                             const std::vector<Vec>& nominal_u, const Mat& Q, const Mat& Qf,
                             const Mat& R) {
  const Eigen::Index n = sys.A.rows();
  const Eigen::Index m = sys.B.cols();
  const Eigen::Index ns = aug_dim(n);
  const std::size_t horizon = nominal_u.size();
  if (horizon == 0 || nominal.size() != horizon + 1)
    throw std::invalid_argument("blqr: nominal run and controls lengths disagree");
  if (Q.rows() != ns || Q.cols() != ns || Qf.rows() != ns || Qf.cols() != ns || R.rows() != m ||
      R.cols() != m)
    throw std::invalid_argument("blqr: weight dimension mismatch");

  const double h = 1e-6;
  const auto step = [&](const Vec& s, const Vec& u) {
    return belief_to_aug(mlo_step_unchecked(sys, aug_to_belief(s, n), u));
  };

  std::vector<Mat> as(horizon), bs(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const Vec sbar = belief_to_aug(nominal[t]);
    const Vec& ubar = nominal_u[t];
    Mat at(ns, ns), bt(ns, m);
    for (Eigen::Index i = 0; i < ns; ++i) {
      Vec lo = sbar, hi = sbar;
      lo[i] -= h;
      hi[i] += h;
      at.col(i) = (step(hi, ubar) - step(lo, ubar)) / (2.0 * h);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      Vec lo = ubar, hi = ubar;
      lo[j] -= h;
      hi[j] += h;
      bt.col(j) = (step(sbar, hi) - step(sbar, lo)) / (2.0 * h);
    }
    as[t] = std::move(at);
    bs[t] = std::move(bt);
  }

  std::vector<Mat> gains(horizon);
  Mat P = symmetrize(Qf);
  for (std::size_t t = horizon; t-- > 0;) {
    const Mat BtP = bs[t].transpose() * P;
    gains[t] = (R + BtP * bs[t]).ldlt().solve(BtP * as[t]);
    const Mat closed = as[t] - bs[t] * gains[t];
    P = symmetrize(Q + gains[t].transpose() * R * gains[t] + closed.transpose() * P * closed);
  }
  return gains;
}

}  // namespace prtlplan
