#pragma once

#include <algorithm>
#include <vector>

#include "abstraction.hpp"

namespace prtlplan {

namespace detail {

// Per-position truth of a skeleton node on the lasso word labels[0..K] with
// wrap K -> L. Until is a least fixpoint (start false), Release a greatest
// (start true); backward in-place sweeps converge within the loop length.
inline std::vector<char> eval_word(const FormulaPtr& f, const std::vector<std::vector<int>>& labels,
                                   int loop_index) {
  const int n = int(labels.size());
  const auto next = [&](int i) { return i + 1 < n ? i + 1 : loop_index; };
  switch (f->kind) {
    case Kind::True:
      return std::vector<char>(std::size_t(n), 1);
    case Kind::False:
      return std::vector<char>(std::size_t(n), 0);
    case Kind::ApRef: {
      std::vector<char> out(std::size_t(n), 0);
      for (int i = 0; i < n; ++i) {
        const std::vector<int>& set = labels[std::size_t(i)];
        out[std::size_t(i)] = std::find(set.begin(), set.end(), f->ap_index) != set.end();
      }
      return out;
    }
    case Kind::And:
    case Kind::Or: {
      std::vector<char> a = eval_word(f->lhs, labels, loop_index);
      const std::vector<char> b = eval_word(f->rhs, labels, loop_index);
      for (int i = 0; i < n; ++i)
        a[std::size_t(i)] = f->kind == Kind::And ? (a[std::size_t(i)] && b[std::size_t(i)])
                                                 : (a[std::size_t(i)] || b[std::size_t(i)]);
      return a;
    }
    case Kind::Until:
    case Kind::Release: {
      const std::vector<char> a = eval_word(f->lhs, labels, loop_index);
      const std::vector<char> b = eval_word(f->rhs, labels, loop_index);
      const bool until = f->kind == Kind::Until;
      std::vector<char> out(std::size_t(n), until ? 0 : 1);
      for (int sweep = 0; sweep <= n + 1; ++sweep) {
        bool changed = false;
        for (int i = n - 1; i >= 0; --i) {
          const char succ = out[std::size_t(next(i))];
          const char v = until ? (b[std::size_t(i)] || (a[std::size_t(i)] && succ))
                               : (b[std::size_t(i)] && (a[std::size_t(i)] || succ));
          if (v != out[std::size_t(i)]) {
            out[std::size_t(i)] = v;
            changed = true;
          }
        }
        if (!changed) return out;
      }
      throw std::logic_error("eval_on_lasso: fixpoint failed to converge");
    }
    default:
      throw std::logic_error("eval_on_lasso: skeleton must be built from AP references");
  }
}

}  // namespace detail

// Truth of the skeleton on the infinite word labels[0..L-1] (labels[L..K])^omega.
inline bool eval_on_lasso(const FormulaPtr& skeleton, const std::vector<std::vector<int>>& labels,
                          int loop_index) {
  if (!skeleton) throw std::invalid_argument("eval_on_lasso: null skeleton");
  if (labels.empty()) throw std::invalid_argument("eval_on_lasso: empty label word");
  if (loop_index < 0 || loop_index >= int(labels.size()))
    throw std::invalid_argument("eval_on_lasso: loop index out of range");
  return detail::eval_word(skeleton, labels, loop_index)[0] != 0;
}

enum class LassoStatus {
  Found,      // satisfying lasso outside the blocklist
  Exhausted,  // every candidate with K <= k_max fails or is blocked
  NoLasso,    // the initial cell reaches no cycle: no infinite path at any bound
};

struct FindLassoResult {
  LassoStatus status = LassoStatus::Exhausted;
  LassoPath lasso;
};

namespace detail {

inline bool reaches_cycle(const KripkeStructure& k, int u, std::vector<int>& color) {
  color[std::size_t(u)] = 1;
  for (int v : k.adjacency[std::size_t(u)]) {
    if (color[std::size_t(v)] == 1) return true;
    if (color[std::size_t(v)] == 0 && reaches_cycle(k, v, color)) return true;
  }
  color[std::size_t(u)] = 2;
  return false;
}

// Depth-first extension of path to length K+1 in ascending successor order.
// Proposals are stutter-free: repeating a cell (including across the K -> L
// wrap when K > L) denotes a word some shorter lasso already denotes.
inline bool lasso_dfs(const KripkeStructure& k, const FormulaPtr& skeleton, int K, int L,
                      const Blocklist& blocked, std::vector<int>& path, LassoPath& out) {
  const int depth = int(path.size()) - 1;
  if (depth == K) {
    const std::vector<int>& adj = k.adjacency[std::size_t(path[std::size_t(K)])];
    if (!std::binary_search(adj.begin(), adj.end(), path[std::size_t(L)])) return false;
    if (K > L && path[std::size_t(K)] == path[std::size_t(L)]) return false;
    LassoPath cand{path, L};
    if (blocked.contains(cand)) return false;
    std::vector<std::vector<int>> word;
    word.reserve(path.size());
    for (int c : path) word.push_back(k.labels[std::size_t(c)]);
    if (!eval_on_lasso(skeleton, word, L)) return false;
    out = std::move(cand);
    return true;
  }
  for (int succ : k.adjacency[std::size_t(path.back())]) {
    if (succ == path.back()) continue;
    path.push_back(succ);
    if (lasso_dfs(k, skeleton, K, L, blocked, path, out)) return true;
    path.pop_back();
  }
  return false;
}

}  // namespace detail

// Minimal satisfying lasso from the initial cell: K ascending, then L
// ascending, then lexicographic cell sequence. Deterministic.
inline FindLassoResult find_lasso(const KripkeStructure& k, const FormulaPtr& skeleton, int k_max,
                                  const Blocklist& blocked) {
  if (k_max < 0) throw std::invalid_argument("find_lasso: k_max must be >= 0");
  if (k.initial < 0 || k.initial >= k.num_cells())
    throw std::invalid_argument("find_lasso: structure has no initial cell");
  FindLassoResult res;
  for (int K = 0; K <= k_max; ++K) {
    for (int L = 0; L <= K; ++L) {
      std::vector<int> path{k.initial};
      if (detail::lasso_dfs(k, skeleton, K, L, blocked, path, res.lasso)) {
        res.status = LassoStatus::Found;
        return res;
      }
    }
  }
  std::vector<int> color(std::size_t(k.num_cells()), 0);
  res.status = detail::reaches_cycle(k, k.initial, color) ? LassoStatus::Exhausted : LassoStatus::NoLasso;
  return res;
}

}  // namespace prtlplan
