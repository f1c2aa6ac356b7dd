#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "prtlplan/abstraction.hpp"

using namespace prtlplan;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }
Mat m1(double x) { return Mat::Constant(1, 1, x); }

Predicate pred_1d(double c, double b, double eps) { return Predicate(v1(c), b, eps); }

BeliefState belief_1d(double mu, double var) { return make_belief(v1(mu), m1(var)); }

// Orthonormal factor of a random matrix; used to draw covariances dominated by cov_max.
Mat random_rotation(RandomStream& rs, int n) {
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rs.normal();
  Eigen::HouseholderQR<Mat> qr(g);
  return Mat(qr.householderQ());
}

}  // namespace

TEST_CASE("sign_of matches the chance-claim margins on a hand-worked 1-D predicate") {
  // x >= 2 written as c = -1, b = -2; eps = 0.05, q = 1.6448536269514722.
  const Predicate p = pred_1d(-1.0, -2.0, 0.05);
  const double q = normal_quantile(0.95);
  const double sigma = 0.15;
  const Mat cov = m1(sigma * sigma);

  // Claim holds iff -mu < -2 - q*sigma, i.e. mu > 2 + q*sigma ~= 2.2467.
  REQUIRE(chance_margin(p, cov) == Catch::Approx(-2.0 - q * sigma).epsilon(1e-12));
  REQUIRE(sign_of(p, belief_1d(2.6, sigma * sigma)) == Sign::Pos);
  // Negation holds iff mu < 2 - q*sigma ~= 1.7533.
  REQUIRE(sign_of(p, belief_1d(1.5, sigma * sigma)) == Sign::Neg);
  // Neither claim: the indifference band.
  REQUIRE(sign_of(p, belief_1d(2.0, sigma * sigma)) == Sign::Unknown);
  REQUIRE(sign_of(p, belief_1d(2.24, sigma * sigma)) == Sign::Unknown);
  REQUIRE(sign_of(p, belief_1d(1.76, sigma * sigma)) == Sign::Unknown);

  std::vector<Sign> signs = abstract_belief(belief_1d(2.6, sigma * sigma), {p});
  REQUIRE(signs == std::vector<Sign>{Sign::Pos});
}

TEST_CASE("enclosure of a Pos sign is the claim half-space cut to the box") {
  const Predicate p = pred_1d(-1.0, -2.0, 0.05);  // x >= 2
  const Polytope box = box_polytope(v1(0.0), v1(5.0));
  const Polytope enc = enclosure({Sign::Pos}, {p}, m1(0.04), box);

  REQUIRE(enc.H.rows() == 3);  // one claim row plus the two box rows
  REQUIRE(contains(enc, v1(2.0)));
  REQUIRE(contains(enc, v1(3.7)));
  REQUIRE(contains(enc, v1(5.0)));
  REQUIRE_FALSE(contains(enc, v1(1.9)));
  REQUIRE_FALSE(contains(enc, v1(5.1)));
}

TEST_CASE("enclosure of an Unknown sign is the slab widened by the worst-case deviation") {
  // Line at 3 with cov_max = 4: slab 3 +- 1.6448536269514722 * 2.
  const Predicate p = pred_1d(1.0, 3.0, 0.05);
  const double half = normal_quantile(0.95) * 2.0;
  const Polytope box = box_polytope(v1(-10.0), v1(10.0));
  const Polytope enc = enclosure({Sign::Unknown}, {p}, m1(4.0), box);

  REQUIRE(enc.H.rows() == 4);  // two slab rows plus the two box rows
  REQUIRE(contains(enc, v1(3.0)));
  REQUIRE(contains(enc, v1(3.0 + half - 1e-9)));
  REQUIRE(contains(enc, v1(3.0 - half + 1e-9)));
  REQUIRE_FALSE(contains(enc, v1(3.0 + half + 1e-6)));
  REQUIRE_FALSE(contains(enc, v1(3.0 - half - 1e-6)));
}

TEST_CASE("contradictory signs yield an empty enclosure") {
  // x <= 1 Pos together with x >= 2 Pos cannot hold at any mean.
  const Predicate low = pred_1d(1.0, 1.0, 0.05);
  const Predicate high = pred_1d(-1.0, -2.0, 0.05);
  const Polytope box = box_polytope(v1(-5.0), v1(5.0));
  REQUIRE(is_empty(enclosure({Sign::Pos, Sign::Pos}, {low, high}, m1(0.01), box)));
  REQUIRE_FALSE(is_empty(enclosure({Sign::Pos, Sign::Neg}, {low, high}, m1(0.01), box)));
}

TEST_CASE("enclosure rejects mismatched inputs") {
  const Predicate p = pred_1d(1.0, 3.0, 0.05);
  const Polytope box = box_polytope(v1(0.0), v1(5.0));
  REQUIRE_THROWS_AS(enclosure({Sign::Pos, Sign::Pos}, {p}, m1(1.0), box), std::invalid_argument);
  const Polytope box2 = box_polytope(Vec::Zero(2), Vec::Constant(2, 1.0));
  REQUIRE_THROWS_AS(enclosure({Sign::Pos}, {p}, Mat::Identity(2, 2), box2), std::invalid_argument);
}

TEST_CASE("collect_predicates walks in reading order, folds negation, and deduplicates") {
  std::map<std::string, Predicate> named{{"a", pred_1d(1.0, 1.0, 0.05)},
                                         {"b", pred_1d(-1.0, -3.0, 0.1)}};
  auto af = extract_subformulas(parse_formula("(!a & b) U a", named));
  REQUIRE(af.ap_list.size() == 2);

  std::vector<Predicate> preds = collect_predicates(af.ap_list);
  REQUIRE(preds.size() == 2);
  REQUIRE_FALSE(preds[0].negated);  // !a contributes the base predicate of a
  REQUIRE(preds[0].c[0] == 1.0);
  REQUIRE(preds[0].b == 1.0);
  REQUIRE(preds[1].c[0] == -1.0);
  REQUIRE(preds[1].b == -3.0);
}

TEST_CASE("eval_under_signs matches atom polarity and is conservative on Unknown") {
  std::map<std::string, Predicate> named{{"a", pred_1d(1.0, 1.0, 0.05)},
                                         {"b", pred_1d(-1.0, -3.0, 0.1)}};
  auto af = extract_subformulas(parse_formula("(!a & b) U (a | b)", named));
  const std::vector<Predicate> preds = collect_predicates(af.ap_list);
  const FormulaPtr lhs = af.ap_list[0];  // !a & b
  const FormulaPtr rhs = af.ap_list[1];  // a | b

  REQUIRE(eval_under_signs(lhs, {Sign::Neg, Sign::Pos}, preds));
  REQUIRE_FALSE(eval_under_signs(lhs, {Sign::Pos, Sign::Pos}, preds));
  REQUIRE_FALSE(eval_under_signs(lhs, {Sign::Unknown, Sign::Pos}, preds));  // Unknown falsifies !a
  REQUIRE_FALSE(eval_under_signs(lhs, {Sign::Neg, Sign::Unknown}, preds));  // Unknown falsifies b
  REQUIRE(eval_under_signs(rhs, {Sign::Pos, Sign::Neg}, preds));
  REQUIRE(eval_under_signs(rhs, {Sign::Neg, Sign::Pos}, preds));
  REQUIRE_FALSE(eval_under_signs(rhs, {Sign::Unknown, Sign::Unknown}, preds));

  REQUIRE(eval_under_signs(mk_true(), {Sign::Unknown, Sign::Unknown}, preds));
  REQUIRE_FALSE(eval_under_signs(mk_false(), {Sign::Pos, Sign::Pos}, preds));
  REQUIRE_THROWS_AS(eval_under_signs(parse_formula("a U b", named), {Sign::Pos, Sign::Pos}, preds),
                    std::logic_error);
  REQUIRE_THROWS_AS(
      eval_under_signs(mk_atom(pred_1d(2.0, 7.0, 0.2)), {Sign::Pos, Sign::Pos}, preds),
      std::invalid_argument);
}

TEST_CASE("build_kripke on one 1-D predicate produces the three-cell structure") {
  // Line at 2, eps = 0.1, cov_max = 0.04: slab 2 +- 1.2816*0.2, inside [0, 5].
  auto af = extract_subformulas(parse_formula("F p[0.1](1*x1 <= 2)"));
  const Polytope box = box_polytope(v1(0.0), v1(5.0));
  const BeliefState b0 = belief_1d(1.0, 0.01);
  KripkeStructure k = build_kripke(af, b0, m1(0.04), box);

  REQUIRE(k.num_cells() == 3);
  REQUIRE(k.pruned_count == 0);
  REQUIRE(k.cells[0].signs == std::vector<Sign>{Sign::Pos});
  REQUIRE(k.cells[1].signs == std::vector<Sign>{Sign::Neg});
  REQUIRE(k.cells[2].signs == std::vector<Sign>{Sign::Unknown});
  REQUIRE(cell_name(k.cells[0]) == "+");
  REQUIRE(cell_name(k.cells[1]) == "-");
  REQUIRE(cell_name(k.cells[2]) == "?");

  REQUIRE(k.labels[0] == std::vector<int>{0});
  REQUIRE(k.labels[1].empty());
  REQUIRE(k.labels[2].empty());

  // All three enclosures meet at or straddle the line, so the graph is complete.
  for (int i = 0; i < 3; ++i) REQUIRE(k.adjacency[i] == std::vector<int>{0, 1, 2});

  REQUIRE(k.initial == 0);
  REQUIRE(cell_of(k, b0) == 0);
  REQUIRE(cell_of(k, belief_1d(4.5, 0.01)) == 1);
  REQUIRE(cell_of(k, belief_1d(2.0, 0.01)) == 2);
}

TEST_CASE("build_kripke with no predicates has a single self-looping cell") {
  AbstractedFormula af;
  af.skeleton = mk_always(mk_true());
  const Polytope box = box_polytope(v1(-1.0), v1(1.0));
  KripkeStructure k = build_kripke(af, belief_1d(0.0, 0.01), m1(0.1), box);

  REQUIRE(k.num_cells() == 1);
  REQUIRE(k.cells[0].signs.empty());
  REQUIRE(k.labels[0].empty());
  REQUIRE(k.adjacency[0] == std::vector<int>{0});
  REQUIRE(k.initial == 0);
}

TEST_CASE("build_kripke prunes empty cells and rejects a pruned initial cell") {
  // Line at 2 with the box at [3, 8]: only the Neg cell survives.
  auto af = extract_subformulas(parse_formula("F p[0.05](1*x1 <= 2)"));
  const Polytope box = box_polytope(v1(3.0), v1(8.0));
  KripkeStructure k = build_kripke(af, belief_1d(5.0, 0.0025), m1(0.01), box);
  REQUIRE(k.num_cells() == 1);
  REQUIRE(k.pruned_count == 2);
  REQUIRE(k.cells[0].signs == std::vector<Sign>{Sign::Neg});
  REQUIRE(k.initial == 0);
  // A belief too diffuse for either claim maps to the pruned Unknown cell.
  REQUIRE(cell_of(k, belief_1d(3.5, 25.0)) == -1);

  REQUIRE_THROWS_WITH(build_kripke(af, belief_1d(3.5, 25.0), m1(0.01), box),
                      Catch::Matchers::ContainsSubstring("'?'"));
}

TEST_CASE("build_kripke validates its inputs") {
  auto af = extract_subformulas(parse_formula("F p[0.1](1*x1 <= 2)"));
  const Polytope box = box_polytope(v1(0.0), v1(5.0));
  const BeliefState b0 = belief_1d(1.0, 0.01);

  REQUIRE_THROWS_AS(build_kripke(af, b0, Mat::Identity(2, 2), box), std::invalid_argument);
  REQUIRE_THROWS_AS(build_kripke(af, b0, m1(-0.5), box), std::invalid_argument);
  Mat skew(2, 2);
  skew << 1, 2, -2, 1;
  REQUIRE_THROWS_AS(
      build_kripke(af, make_belief(Vec::Zero(2), Mat::Identity(2, 2) * 0.01), skew,
                   box_polytope(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0))),
      std::invalid_argument);
  REQUIRE_THROWS_AS(build_kripke(af, make_belief(Vec::Zero(2), Mat::Identity(2, 2)), m1(0.04), box),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(build_kripke(af, belief_1d(7.0, 0.01), m1(0.04), box), std::invalid_argument);

  auto af2 = extract_subformulas(parse_formula("F p[0.1](1*x1 + 1*x2 <= 2)"));
  REQUIRE_THROWS_AS(build_kripke(af2, b0, m1(0.04), box), std::invalid_argument);
}

TEST_CASE("two 1-D predicates carve the expected live cells with lexicographic ids") {
  // Lines at 1 and 3, narrow slabs; live cells ordered (+,-) < (-,+) < ... by code.
  std::map<std::string, Predicate> named{{"a", pred_1d(1.0, 1.0, 0.05)},
                                         {"b", pred_1d(1.0, 3.0, 0.05)}};
  auto af = extract_subformulas(parse_formula("a U b", named));
  const Polytope box = box_polytope(v1(-2.0), v1(6.0));
  KripkeStructure k = build_kripke(af, belief_1d(0.0, 0.0025), m1(0.01), box);

  // Of the nine sign vectors only (x<=1)(x<=3) refinements are realizable:
  // (+,+) [-2,1], (+,?) empty, (+,-) empty, (-,+) [1,3] band, (-,?) slab at 3,
  // (-,-) [3,6], (?,+) slab at 1, (?,?) empty, (?,-) empty.
  REQUIRE(k.num_cells() == 5);
  REQUIRE(k.pruned_count == 4);
  REQUIRE(k.cells[0].signs == std::vector<Sign>({Sign::Pos, Sign::Pos}));
  REQUIRE(k.cells[1].signs == std::vector<Sign>({Sign::Neg, Sign::Pos}));
  REQUIRE(k.cells[2].signs == std::vector<Sign>({Sign::Neg, Sign::Neg}));
  REQUIRE(k.cells[3].signs == std::vector<Sign>({Sign::Neg, Sign::Unknown}));
  REQUIRE(k.cells[4].signs == std::vector<Sign>({Sign::Unknown, Sign::Pos}));

  // a is true only in (+,+); b in (+,+), (-,+), (?,+).
  REQUIRE(k.labels[0] == std::vector<int>({0, 1}));
  REQUIRE(k.labels[1] == std::vector<int>{1});
  REQUIRE(k.labels[2].empty());
  REQUIRE(k.labels[3].empty());
  REQUIRE(k.labels[4] == std::vector<int>{1});

  // Geometric chain (+,+) - (?,+) - (-,+) - (-,?) - (-,-). Same-label
  // neighborhoods {(-,+),(?,+)} and {(-,-),(-,?)} bridge extra pairs, but
  // (+,+) sits alone in its label so it only reaches its direct contacts.
  REQUIRE(k.adjacency[0] == std::vector<int>({0, 1, 4}));
  REQUIRE(k.adjacency[1] == std::vector<int>({0, 1, 2, 3, 4}));
  REQUIRE(k.adjacency[2] == std::vector<int>({1, 2, 3, 4}));
  REQUIRE(k.adjacency[3] == std::vector<int>({1, 2, 3, 4}));
  REQUIRE(k.adjacency[4] == std::vector<int>({0, 1, 2, 3, 4}));
  REQUIRE(k.initial == 0);
}

TEST_CASE("belief means stay inside the enclosure of their own cell") {
  // Dominated covariances: cov = S Q diag(u) Q' S' with S = sqrt(cov_max), u in [0,1].
  RandomStream rs(20260814);
  Mat g(2, 2);
  g << 0.9, 0.3, 0.3, 0.6;
  const Mat cov_max = symmetrize(Mat(g * g.transpose()));
  const Mat s = psd_sqrt(cov_max);
  const Polytope box = box_polytope(Vec::Constant(2, -3.0), Vec::Constant(2, 3.0));

  Vec c1(2), c2(2);
  c1 << 1.0, 1.0;
  c2 << 1.0, -1.0;
  const std::vector<Predicate> preds{Predicate(c1, 1.0, 0.05), Predicate(c2, 0.0, 0.2)};

  for (int trial = 0; trial < 200; ++trial) {
    Vec mu(2);
    mu << rs.uniform(-3.0, 3.0), rs.uniform(-3.0, 3.0);
    const Mat q = random_rotation(rs, 2);
    Vec u(2);
    u << rs.uniform(0.0, 1.0), rs.uniform(0.0, 1.0);
    const Mat cov = symmetrize(Mat(s * q * u.asDiagonal() * q.transpose() * s.transpose()));
    REQUIRE(psd_leq(cov, cov_max, 1e-9));

    const BeliefState b = make_belief(mu, cov);
    const std::vector<Sign> signs = abstract_belief(b, preds);
    const Polytope enc = enclosure(signs, preds, cov_max, box);
    REQUIRE(contains(enc, mu, 1e-7));
  }
}

TEST_CASE("cell labels under-approximate belief-level truth") {
  RandomStream rs(77001);
  std::map<std::string, Predicate> named{{"a", pred_1d(1.0, 1.0, 0.05)},
                                         {"b", pred_1d(1.0, 3.0, 0.05)}};
  auto af = extract_subformulas(parse_formula("(!a & b) U (a | !b)", named));
  const std::vector<Predicate> preds = collect_predicates(af.ap_list);

  for (int trial = 0; trial < 300; ++trial) {
    const BeliefState b = belief_1d(rs.uniform(-2.0, 6.0), rs.uniform(0.0001, 0.5));
    const std::vector<Sign> signs = abstract_belief(b, preds);
    for (const FormulaPtr& ap : af.ap_list)
      if (eval_under_signs(ap, signs, preds)) REQUIRE(holds_at(ap, b));
  }
}

TEST_CASE("abstracted filter trajectories trace paths of the Kripke structure") {
  // 1-D integrator under the most-likely observation: the mean obeys mu' = mu + u
  // and the covariance shrinks from 0.09 toward the Riccati fixed point ~0.045,
  // staying under cov_max = 0.1. The two-line structure from the previous case has
  // non-edges (0,2) and (0,3); with |u| <= 0.2 a mean cannot jump a claim slab in
  // one step, so every consecutive cell pair must be a real transition.
  LinearSystem sys;
  sys.A = m1(1.0);
  sys.B = m1(1.0);
  sys.C = m1(1.0);
  sys.W = m1(0.01);
  sys.noise = NoiseModel::make_constant(v1(0.25));
  sys.Hu = Mat(2, 1);
  sys.Hu << 1, -1;
  sys.cu = Vec::Constant(2, -0.2);  // |u| <= 0.2

  std::map<std::string, Predicate> named{{"a", pred_1d(1.0, 1.0, 0.05)},
                                         {"b", pred_1d(1.0, 3.0, 0.05)}};
  auto af = extract_subformulas(parse_formula("a U b", named));
  const Polytope box = box_polytope(v1(-10.0), v1(10.0));
  const Mat cov_max = m1(0.1);
  const BeliefState b0 = belief_1d(0.0, 0.09);
  const KripkeStructure k = build_kripke(af, b0, cov_max, box);
  REQUIRE(k.num_cells() == 5);

  RandomStream rs(424242);
  for (int traj = 0; traj < 100; ++traj) {
    BeliefState b = b0;
    int prev = cell_of(k, b);
    REQUIRE(prev == k.initial);
    for (int t = 0; t < 40; ++t) {
      b = mlo_step(sys, b, v1(rs.uniform(-0.1, 0.2)));  // drift right to cross the lines
      REQUIRE(psd_leq(b.cov, cov_max, 1e-9));
      const int cur = cell_of(k, b);
      REQUIRE(cur >= 0);
      REQUIRE(std::binary_search(k.adjacency[prev].begin(), k.adjacency[prev].end(), cur));
      prev = cur;
    }
  }
}

TEST_CASE("polytopes_intersect agrees with interval overlap on random box pairs") {
  RandomStream rs(90125);
  for (int trial = 0; trial < 100; ++trial) {
    Vec lo_a(2), hi_a(2), lo_b(2), hi_b(2);
    for (int i = 0; i < 2; ++i) {
      const double a1 = rs.uniform(-3.0, 3.0), a2 = rs.uniform(-3.0, 3.0);
      lo_a[i] = std::min(a1, a2);
      hi_a[i] = std::max(a1, a2);
      const double b1 = rs.uniform(-3.0, 3.0), b2 = rs.uniform(-3.0, 3.0);
      lo_b[i] = std::min(b1, b2);
      hi_b[i] = std::max(b1, b2);
    }
    const bool expect = (lo_a[0] <= hi_b[0] && lo_b[0] <= hi_a[0]) &&
                        (lo_a[1] <= hi_b[1] && lo_b[1] <= hi_a[1]);
    REQUIRE(polytopes_intersect(box_polytope(lo_a, hi_a), box_polytope(lo_b, hi_b)) == expect);
  }
}

TEST_CASE("LassoPath equality and Blocklist membership are exact") {
  LassoPath a{{0, 2, 1}, 1};
  LassoPath b{{0, 2, 1}, 1};
  LassoPath c{{0, 2, 1}, 0};
  LassoPath d{{0, 2}, 1};
  REQUIRE(a == b);
  REQUIRE_FALSE(a == c);
  REQUIRE_FALSE(a == d);
  REQUIRE(a.K() == 2);

  Blocklist bl;
  REQUIRE(bl.size() == 0);
  REQUIRE_FALSE(bl.contains(a));
  bl.block(a);
  REQUIRE(bl.contains(a));
  REQUIRE(bl.contains(b));
  REQUIRE_FALSE(bl.contains(c));
  bl.block(b);  // idempotent
  REQUIRE(bl.size() == 1);
  bl.block(c);
  bl.block(d);
  REQUIRE(bl.size() == 3);
}
