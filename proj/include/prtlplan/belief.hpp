#pragma once

#include <utility>
#include <vector>

#include "formula.hpp"
#include "gaussian.hpp"
#include "linalg.hpp"
#include "polytope.hpp"

namespace prtlplan {

struct BeliefState {
  Vec mean;
  Mat cov;
};

inline BeliefState make_belief(Vec mean, Mat cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw std::invalid_argument("make_belief: dimension mismatch");
  if (!is_symmetric(cov)) throw std::invalid_argument("make_belief: cov not symmetric");
  return {std::move(mean), clamp_psd(cov)};
}

inline bool pred_holds(const Predicate& p, const BeliefState& b) {
  return pred_holds(p, b.mean, b.cov);
}

inline bool holds_at(const FormulaPtr& f, const BeliefState& b) {
  return holds_at(f, b.mean, b.cov);
}

// One monomial coef*(x[state_index] - shift)^power of a per-output variance polynomial.
struct PolyTerm {
  double coef = 0.0;
  int state_index = 0;
  double shift = 0.0;
  int power = 0;
};

// Diagonal observation-noise model: either a constant variance per output or,
// per output, min(sigma2_const, poly(x) + sigma2_min).
struct NoiseModel {
  enum class Kind { Constant, MinConstPoly } kind = Kind::Constant;
  Vec constant;                              // Constant: per-output variances
  double sigma2_const = 0.0;                 // MinConstPoly cap
  double sigma2_min = 0.0;                   // MinConstPoly floor, > 0
  std::vector<std::vector<PolyTerm>> poly;   // MinConstPoly: per-output terms

  static NoiseModel make_constant(Vec variances) {
    if ((variances.array() < 0.0).any())
      throw std::invalid_argument("NoiseModel: constant variances must be >= 0");
    NoiseModel m;
    m.kind = Kind::Constant;
    m.constant = std::move(variances);
    return m;
  }

  static NoiseModel make_min_const_poly(double sigma2_const, double sigma2_min,
                                        std::vector<std::vector<PolyTerm>> poly, int n) {
    if (!(sigma2_min > 0.0))
      throw std::invalid_argument("NoiseModel: sigma2_min must be > 0");
    if (!(sigma2_const >= sigma2_min))
      throw std::invalid_argument("NoiseModel: sigma2_const must be >= sigma2_min");
    for (const auto& terms : poly)
      for (const auto& t : terms) {
        if (t.coef < 0.0)
          throw std::invalid_argument("NoiseModel: polynomial coefficients must be >= 0");
        if (t.power < 0 || t.power % 2 != 0)
          throw std::invalid_argument("NoiseModel: polynomial powers must be even and >= 0");
        if (t.state_index < 0 || t.state_index >= n)
          throw std::invalid_argument("NoiseModel: polynomial state index out of range");
      }
    NoiseModel m;
    m.kind = Kind::MinConstPoly;
    m.sigma2_const = sigma2_const;
    m.sigma2_min = sigma2_min;
    m.poly = std::move(poly);
    return m;
  }

  Eigen::Index outputs() const {
    return kind == Kind::Constant ? constant.size()
                                  : static_cast<Eigen::Index>(poly.size());
  }
};

inline Mat noise_cov(const NoiseModel& model, const Vec& x) {
  const Eigen::Index p = model.outputs();
  Mat v = Mat::Zero(p, p);
  if (model.kind == NoiseModel::Kind::Constant) {
    for (Eigen::Index i = 0; i < p; ++i) v(i, i) = model.constant[i];
    return v;
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    double acc = 0.0;
    for (const auto& t : model.poly[static_cast<std::size_t>(i)])
      acc += t.coef * std::pow(x[t.state_index] - t.shift, t.power);
    v(i, i) = std::min(model.sigma2_const, acc + model.sigma2_min);
  }
  return v;
}

// Discrete-time linear-Gaussian plant with a polytopic input set {u : Hu u >= cu}.
struct LinearSystem {
  Mat A, B, C, W;
  NoiseModel noise;
  Mat Hu;
  Vec cu;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }
};

inline bool input_ok(const LinearSystem& sys, const Vec& u, double tol = 1e-9) {
  if (u.size() != sys.m()) return false;
  return ((sys.Hu * u - sys.cu).array() >= -tol).all();
}

namespace detail {

inline BeliefState kalman_core(const LinearSystem& sys, const BeliefState& b, const Vec& u,
                               const Vec* y, bool check_input) {
  if (b.mean.size() != sys.n() || u.size() != sys.m())
    throw std::invalid_argument("kalman_update: dimension mismatch");
  if (y && y->size() != sys.p())
    throw std::invalid_argument("kalman_update: observation dimension mismatch");
  if (check_input && !input_ok(sys, u))
    throw std::invalid_argument("kalman_update: control outside the input set");
  Vec f = sys.A * b.mean + sys.B * u;
  Mat gamma = symmetrize(sys.A * b.cov * sys.A.transpose() + sys.W);
  Mat s = symmetrize(sys.C * gamma * sys.C.transpose() + noise_cov(sys.noise, f));
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  double lmax = es.eigenvalues().maxCoeff();
  if (es.eigenvalues().minCoeff() < 1e-12 * std::max(1.0, lmax))
    throw std::invalid_argument("kalman_update: innovation covariance is singular");
  Mat k = gamma * sys.C.transpose() * s.inverse();
  BeliefState out;
  out.mean = y ? Vec(k * (*y - sys.C * f) + f) : f;
  out.cov = clamp_psd(gamma - k * sys.C * gamma);
  return out;
}

}  // namespace detail

inline BeliefState kalman_update(const LinearSystem& sys, const BeliefState& b,
                                 const Vec& u, const Vec& y) {
  return detail::kalman_core(sys, b, u, &y, true);
}

// Maximum-likelihood-observation step: kalman_update with y = C(A mean + B u),
// which zeroes the innovation so the mean propagates openly.
inline BeliefState mlo_step(const LinearSystem& sys, const BeliefState& b, const Vec& u) {
  return detail::kalman_core(sys, b, u, nullptr, true);
}

// Same dynamics without the input-set precondition; used by steering code that
// probes finite-difference perturbations of a feasible control.
inline BeliefState mlo_step_unchecked(const LinearSystem& sys, const BeliefState& b,
                                      const Vec& u) {
  return detail::kalman_core(sys, b, u, nullptr, false);
}

// Ground-truth stochastic step: the observation is of the successor state.
inline std::pair<Vec, Vec> simulate_step(const LinearSystem& sys, const Vec& x_true,
                                         const Vec& u, RandomStream& rng) {
  if (x_true.size() != sys.n() || u.size() != sys.m())
    throw std::invalid_argument("simulate_step: dimension mismatch");
  Vec w(sys.n());
  for (Eigen::Index i = 0; i < sys.n(); ++i) w[i] = rng.normal();
  Vec x_next = sys.A * x_true + sys.B * u + psd_sqrt(sys.W) * w;
  Vec v(sys.p());
  for (Eigen::Index i = 0; i < sys.p(); ++i) v[i] = rng.normal();
  Vec y = sys.C * x_next + psd_sqrt(noise_cov(sys.noise, x_next)) * v;
  return {x_next, y};
}

}  // namespace prtlplan
