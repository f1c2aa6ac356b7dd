#include <catch2/catch_amalgamated.hpp>

#include "prtlplan/gaussian.hpp"
#include "prtlplan/lp.hpp"

using prtlplan::Mat;
using prtlplan::Vec;
namespace lp = prtlplan::lp;

namespace {

Mat box_constraints(const Vec& lo, const Vec& hi) {
  const Eigen::Index n = lo.size();
  Mat A = Mat::Zero(2 * n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, i) = 1.0;
    A(n + i, i) = -1.0;
  }
  return A;
}

Vec box_rhs(const Vec& lo, const Vec& hi) {
  const Eigen::Index n = lo.size();
  Vec b(2 * n);
  b.segment(0, n) = hi;
  b.segment(n, n) = -lo;
  return b;
}

}  // namespace

TEST_CASE("lp solves a hand-worked 2d problem") {
  // min -x - 2y s.t. x + y <= 4, x <= 3, y <= 2, -x <= 0, -y <= 0. Optimum at (2,2).
  Mat A(5, 2);
  A << 1, 1, 1, 0, 0, 1, -1, 0, 0, -1;
  Vec b(5);
  b << 4, 3, 2, 0, 0;
  Vec c(2);
  c << -1, -2;
  auto r = lp::minimize(c, A, b);
  REQUIRE(r.status == lp::Status::Optimal);
  REQUIRE(r.x[0] == Catch::Approx(2.0).margin(1e-7));
  REQUIRE(r.x[1] == Catch::Approx(2.0).margin(1e-7));
  REQUIRE(r.objective == Catch::Approx(-6.0).margin(1e-7));
}

TEST_CASE("lp handles free variables and negative rhs") {
  // min x s.t. -x <= -5 (x >= 5): optimum 5.
  Mat A(1, 1);
  A << -1;
  Vec b(1);
  b << -5;
  Vec c(1);
  c << 1;
  auto r = lp::minimize(c, A, b);
  REQUIRE(r.status == lp::Status::Optimal);
  REQUIRE(r.x[0] == Catch::Approx(5.0).margin(1e-7));
}

TEST_CASE("lp reports infeasible and unbounded") {
  Mat A(2, 1);
  A << 1, -1;
  Vec b(2);
  b << 1, -2;  // x <= 1 and x >= 2
  Vec c(1);
  c << 1;
  REQUIRE(lp::minimize(c, A, b).status == lp::Status::Infeasible);
  REQUIRE_FALSE(lp::feasible(A, b));

  Mat A2(1, 1);
  A2 << 1;  // x <= 3, minimize x downward forever
  Vec b2(1);
  b2 << 3;
  REQUIRE(lp::minimize(c, A2, b2).status == lp::Status::Unbounded);
}

TEST_CASE("lp optimum over random boxes matches the closed form") {
  prtlplan::RandomStream rs(123);
  for (int trial = 0; trial < 50; ++trial) {
    int n = rs.uniform_int(1, 4);
    Vec lo(n), hi(n), c(n);
    for (int i = 0; i < n; ++i) {
      lo[i] = rs.uniform(-5.0, 0.0);
      hi[i] = lo[i] + rs.uniform(0.1, 6.0);
      c[i] = rs.uniform(-2.0, 2.0);
    }
    auto r = lp::minimize(c, box_constraints(lo, hi), box_rhs(lo, hi));
    REQUIRE(r.status == lp::Status::Optimal);
    double expect = 0.0;
    for (int i = 0; i < n; ++i) expect += c[i] >= 0 ? c[i] * lo[i] : c[i] * hi[i];
    REQUIRE(r.objective == Catch::Approx(expect).margin(1e-6));
  }
}

TEST_CASE("lp degenerate problems terminate") {
  // Redundant equality-like rows force artificials and degenerate pivots.
  Mat A(4, 2);
  A << 1, 1, -1, -1, 2, 2, -2, -2;  // x+y == 3 twice over
  Vec b(4);
  b << 3, -3, 6, -6;
  Vec c(2);
  c << 1, 0;
  auto r = lp::minimize(c, A, b);
  REQUIRE(r.status == lp::Status::Unbounded);  // x free along x+y=3
  Mat A2(6, 2);
  A2 << 1, 1, -1, -1, 2, 2, -2, -2, -1, 0, 0, -1;
  Vec b2(6);
  b2 << 3, -3, 6, -6, 0, 0;
  auto r2 = lp::minimize(c, A2, b2);
  REQUIRE(r2.status == lp::Status::Optimal);
  REQUIRE(r2.objective == Catch::Approx(0.0).margin(1e-7));
}

TEST_CASE("l1_project matches independent per-coordinate solution on boxes") {
  // With H u >= c a pure box, the L1 projection clamps coordinatewise.
  prtlplan::RandomStream rs(321);
  for (int trial = 0; trial < 30; ++trial) {
    int n = rs.uniform_int(1, 3);
    Vec lo(n), hi(n), target(n);
    for (int i = 0; i < n; ++i) {
      lo[i] = rs.uniform(-3.0, 0.0);
      hi[i] = lo[i] + rs.uniform(0.5, 4.0);
      target[i] = rs.uniform(-5.0, 5.0);
    }
    Mat H(2 * n, n);
    Vec cvec(2 * n);
    H.setZero();
    for (int i = 0; i < n; ++i) {
      H(i, i) = 1.0;
      cvec[i] = lo[i];
      H(n + i, i) = -1.0;
      cvec[n + i] = -hi[i];
    }
    auto r = lp::l1_project(target, H, cvec);
    REQUIRE(r.status == lp::Status::Optimal);
    double expect_obj = 0.0;
    for (int i = 0; i < n; ++i) {
      double clamped = std::min(hi[i], std::max(lo[i], target[i]));
      REQUIRE(r.x[i] == Catch::Approx(clamped).margin(1e-6));
      expect_obj += std::abs(clamped - target[i]);
    }
    REQUIRE(r.objective == Catch::Approx(expect_obj).margin(1e-6));
  }
}

TEST_CASE("l1_project reports infeasible constraint sets") {
  Mat H(2, 1);
  H << 1, -1;  // u >= 2 and u <= 1
  Vec c(2);
  c << 2, -1;
  Vec target(1);
  target << 0;
  REQUIRE(lp::l1_project(target, H, c).status == lp::Status::Infeasible);
}
