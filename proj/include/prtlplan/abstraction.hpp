#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "belief.hpp"
#include "formula.hpp"
#include "linalg.hpp"
#include "polytope.hpp"

namespace prtlplan {

// Sign of one chance-constrained predicate in a belief cell. Numeric values are
// load-bearing: cell ids follow lexicographic sign order, so Pos < Neg < Unknown
// makes the lasso search prefer confident cells on ties.
enum class Sign { Pos = 0, Neg = 1, Unknown = 2 };

inline char sign_char(Sign s) { return s == Sign::Pos ? '+' : (s == Sign::Neg ? '-' : '?'); }

// A belief-space cell: one sign per canonical predicate, id = index among live cells.
struct Cell {
  std::vector<Sign> signs;
  int id = -1;
};

inline std::string cell_name(const Cell& c) {
  std::string s;
  for (Sign g : c.signs) s.push_back(sign_char(g));
  return s;
}

namespace detail {

// Canonical base identity: same hyperplane and confidence level, negation folded out.
inline bool pred_base_equal(const Predicate& a, const Predicate& b) {
  if (a.c.size() != b.c.size() || a.b != b.b || a.eps != b.eps) return false;
  for (int i = 0; i < a.c.size(); ++i)
    if (a.c(i) != b.c(i)) return false;
  return true;
}

inline void collect_atoms(const FormulaPtr& f, std::vector<Predicate>& out) {
  if (!f) return;
  switch (f->kind) {
    case Kind::Atom: {
      Predicate base = f->pred;
      base.negated = false;
      for (const Predicate& p : out)
        if (pred_base_equal(p, base)) return;
      out.push_back(std::move(base));
      return;
    }
    case Kind::True:
    case Kind::False:
      return;
    default:
      collect_atoms(f->lhs, out);
      collect_atoms(f->rhs, out);
      return;
  }
}

}  // namespace detail

// Canonical predicates over all atomic propositions, in reading order, deduplicated
// on exact (c, b, eps). A negated atom contributes its base predicate.
inline std::vector<Predicate> collect_predicates(const std::vector<FormulaPtr>& ap_list) {
  std::vector<Predicate> preds;
  for (const FormulaPtr& ap : ap_list) detail::collect_atoms(ap, preds);
  return preds;
}

// Sign of one base predicate in a belief: Pos if the chance claim holds, Neg if the
// negated claim holds, Unknown otherwise. The claims are mutually exclusive.
inline Sign sign_of(const Predicate& base, const BeliefState& b) {
  if (pred_holds(base, b)) return Sign::Pos;
  if (pred_holds(base.negation(), b)) return Sign::Neg;
  return Sign::Unknown;
}

inline std::vector<Sign> abstract_belief(const BeliefState& b, const std::vector<Predicate>& preds) {
  std::vector<Sign> signs;
  signs.reserve(preds.size());
  for (const Predicate& p : preds) signs.push_back(sign_of(p, b));
  return signs;
}

// Mean-space enclosure of a cell: every belief with this sign vector and covariance
// at most cov_max has its mean inside. Pos: c'mu <= b; Neg: c'mu >= b; Unknown: the
// slab |c'mu - b| <= q*sqrt(c'cov_max c). Intersected with the workspace box.
inline Polytope enclosure(const std::vector<Sign>& signs, const std::vector<Predicate>& preds,
                          const Mat& cov_max, const Polytope& box) {
  if (signs.size() != preds.size()) throw std::invalid_argument("enclosure: signs/preds size mismatch");
  const int n = box.dim();
  int rows = 0;
  for (Sign s : signs) rows += (s == Sign::Unknown) ? 2 : 1;
  Mat H(rows + box.H.rows(), n);
  Vec g(rows + box.H.rows());
  int r = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Predicate& p = preds[i];
    if (p.c.size() != n) throw std::invalid_argument("enclosure: predicate dimension mismatch");
    switch (signs[i]) {
      case Sign::Pos:
        H.row(r) = p.c.transpose();
        g(r++) = p.b;
        break;
      case Sign::Neg:
        H.row(r) = -p.c.transpose();
        g(r++) = -p.b;
        break;
      case Sign::Unknown: {
        const double smax = std::sqrt(std::max(0.0, double(p.c.transpose() * cov_max * p.c)));
        H.row(r) = p.c.transpose();
        g(r++) = p.b + p.q * smax;
        H.row(r) = -p.c.transpose();
        g(r++) = -(p.b - p.q * smax);
        break;
      }
    }
  }
  H.bottomRows(box.H.rows()) = box.H;
  g.tail(box.H.rows()) = box.g;
  return Polytope{std::move(H), std::move(g)};
}

// Truth of a temporal-free AP formula in a cell. Unknown falsifies the atom and its
// negation alike, so cell labels under-approximate belief truth.
inline bool eval_under_signs(const FormulaPtr& f, const std::vector<Sign>& signs,
                             const std::vector<Predicate>& preds) {
  if (!f) throw std::invalid_argument("eval_under_signs: null formula");
  switch (f->kind) {
    case Kind::True:
      return true;
    case Kind::False:
      return false;
    case Kind::Atom: {
      Predicate base = f->pred;
      base.negated = false;
      for (std::size_t i = 0; i < preds.size(); ++i)
        if (detail::pred_base_equal(preds[i], base))
          return f->pred.negated ? signs[i] == Sign::Neg : signs[i] == Sign::Pos;
      throw std::invalid_argument("eval_under_signs: atom not among canonical predicates");
    }
    case Kind::And:
      return eval_under_signs(f->lhs, signs, preds) && eval_under_signs(f->rhs, signs, preds);
    case Kind::Or:
      return eval_under_signs(f->lhs, signs, preds) || eval_under_signs(f->rhs, signs, preds);
    default:
      throw std::logic_error("eval_under_signs: formula is not temporal-free");
  }
}

// Finite Kripke abstraction of belief space. States are the live cells (nonempty
// enclosure); transitions are symmetric, reflexive, and computed from enclosure
// overlap of the cells together with their same-label neighborhoods.
struct KripkeStructure {
  std::vector<Cell> cells;
  std::vector<Polytope> enclosures;
  std::vector<std::vector<int>> labels;     // sorted AP indices per cell
  std::vector<std::vector<int>> adjacency;  // sorted successor ids per cell
  int initial = -1;
  int pruned_count = 0;
  std::vector<Predicate> preds;
  Mat cov_max;
  Polytope box;

  int num_cells() const { return int(cells.size()); }
};

// Cell id of a belief under the abstraction's canonical predicates, or -1 when the
// sign vector has an empty enclosure (pruned) or the structure has no such cell.
inline int cell_of(const KripkeStructure& k, const BeliefState& b) {
  const std::vector<Sign> signs = abstract_belief(b, k.preds);
  for (const Cell& c : k.cells)
    if (c.signs == signs) return c.id;
  return -1;
}

inline KripkeStructure build_kripke(const AbstractedFormula& af, const BeliefState& b0,
                                    const Mat& cov_max, const Polytope& box) {
  const int n = box.dim();
  if (cov_max.rows() != n || cov_max.cols() != n)
    throw std::invalid_argument("build_kripke: cov_max dimension mismatch");
  if (!is_symmetric(cov_max) || min_eigenvalue(symmetrize(cov_max)) < -1e-9)
    throw std::invalid_argument("build_kripke: cov_max must be symmetric PSD");
  if (b0.mean.size() != n) throw std::invalid_argument("build_kripke: initial belief dimension mismatch");
  if (!contains(box, b0.mean)) throw std::invalid_argument("build_kripke: initial mean outside the workspace box");

  KripkeStructure k;
  k.preds = collect_predicates(af.ap_list);
  k.cov_max = symmetrize(cov_max);
  k.box = box;
  const int m = int(k.preds.size());
  for (const Predicate& p : k.preds)
    if (p.c.size() != n) throw std::invalid_argument("build_kripke: predicate dimension mismatch");

  // Lexicographic enumeration of sign vectors; ids are assigned in this order.
  std::vector<Sign> signs(m, Sign::Pos);
  long total = 1;
  for (int i = 0; i < m; ++i) total *= 3;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = m - 1; i >= 0; --i) {
      signs[i] = Sign(int(c % 3));
      c /= 3;
    }
    Polytope enc = enclosure(signs, k.preds, k.cov_max, box);
    if (is_empty(enc)) {
      ++k.pruned_count;
      continue;
    }
    Cell cell;
    cell.signs = signs;
    cell.id = int(k.cells.size());
    k.cells.push_back(std::move(cell));
    k.enclosures.push_back(std::move(enc));
  }

  // Labels: AP indices true under the cell's signs.
  k.labels.resize(k.cells.size());
  for (std::size_t i = 0; i < k.cells.size(); ++i)
    for (std::size_t a = 0; a < af.ap_list.size(); ++a)
      if (eval_under_signs(af.ap_list[a], k.cells[i].signs, k.preds)) k.labels[i].push_back(int(a));

  const int nc = int(k.cells.size());
  std::vector<std::vector<bool>> touch(nc, std::vector<bool>(nc, false));
  for (int i = 0; i < nc; ++i) {
    touch[i][i] = true;
    for (int j = i + 1; j < nc; ++j) touch[i][j] = touch[j][i] = polytopes_intersect(k.enclosures[i], k.enclosures[j]);
  }

  // Same-label neighborhood of each cell (one level, no closure).
  std::vector<std::vector<int>> group(nc);
  for (int i = 0; i < nc; ++i) {
    group[i].push_back(i);
    for (int j = 0; j < nc; ++j)
      if (j != i && k.labels[j] == k.labels[i] && touch[i][j]) group[i].push_back(j);
  }

  k.adjacency.resize(nc);
  for (int i = 0; i < nc; ++i) {
    for (int j = i; j < nc; ++j) {
      bool connected = false;
      for (int p1 : group[i]) {
        for (int p2 : group[j])
          if (touch[p1][p2]) {
            connected = true;
            break;
          }
        if (connected) break;
      }
      if (connected) {
        k.adjacency[i].push_back(j);
        if (j != i) k.adjacency[j].push_back(i);
      }
    }
  }
  for (auto& adj : k.adjacency) std::sort(adj.begin(), adj.end());

  const std::vector<Sign> s0 = abstract_belief(b0, k.preds);
  for (const Cell& c : k.cells)
    if (c.signs == s0) {
      k.initial = c.id;
      break;
    }
  if (k.initial < 0) {
    std::string name;
    for (Sign s : s0) name.push_back(sign_char(s));
    throw std::invalid_argument("build_kripke: initial belief cell '" + name +
                                "' has empty enclosure (is the initial mean inside the workspace?)");
  }
  return k;
}

// A lasso in the abstraction: cells[0..K] with the loop formed by wrapping from
// cells[K] back to cells[loop_index].
struct LassoPath {
  std::vector<int> cells;
  int loop_index = 0;

  int K() const { return int(cells.size()) - 1; }
  friend bool operator==(const LassoPath& a, const LassoPath& b) {
    return a.loop_index == b.loop_index && a.cells == b.cells;
  }
};

// Blocked lassos accumulated by the synthesis loop. Keyed on the exact cell
// sequence and loop index; blocking is idempotent.
class Blocklist {
 public:
  bool contains(const LassoPath& l) const { return items_.count({l.cells, l.loop_index}) > 0; }
  void block(const LassoPath& l) { items_.insert({l.cells, l.loop_index}); }
  std::size_t size() const { return items_.size(); }

 private:
  std::set<std::pair<std::vector<int>, int>> items_;
};

}  // namespace prtlplan
