#pragma once
// Sampling-based feasibility search: realizes a discrete lasso as a dynamically
// feasible most-likely-observation belief trajectory, with LQR mean steering,
// belief-LQR covariance steering, sparse-tree pruning, and controllability-based
// loop closure.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "prtlplan/abstraction.hpp"
#include "prtlplan/belief.hpp"
#include "prtlplan/gaussian.hpp"
#include "prtlplan/linalg.hpp"
#include "prtlplan/lqr.hpp"
#include "prtlplan/polytope.hpp"

namespace prtlplan {

struct SearchParams {
  double w_sigma = 1.0;       // covariance weight in the belief metric
  double delta_near = 0.5;    // best-nearest neighborhood radius
  double delta_drain = 0.25;  // drain dominance radius
  int t_min = 1;              // propagation duration bounds, in steps
  int t_max = 20;
  double q_mean = 1.0;        // stage weight on the mean block
  double q_cov = 1.0;         // stage weight on the covariance block
  double r_ctrl = 1.0;        // control effort weight
  double qf_mean = 10.0;      // terminal weight on the mean block
  double qf_cov = 10.0;       // terminal weight on the covariance block
  double tol_loop = 1e-4;     // loop-closure mean tolerance, infinity norm
  double tol_psd = 1e-6;      // loop-closure covariance PSD slack
};

// Open-loop belief plan: b_0..b_H, u_0..u_{H-1}, the lasso position of every
// step, and the step H_L the loop closes back to (b_H returns to b_{H_L}).
struct Plan {
  std::vector<BeliefState> beliefs;
  std::vector<Vec> controls;
  std::vector<int> index_map;
  int loop_entry = 0;

  int horizon() const { return int(controls.size()); }
};

// d(b, b') = |mu - mu'|_2 + w_sigma * |Sigma - Sigma'|_F.
inline double belief_distance(const BeliefState& a, const BeliefState& b, double w_sigma) {
  return (a.mean - b.mean).norm() + w_sigma * (a.cov - b.cov).norm();
}

// Membership in a cell's region: every Pos/Neg claim of the sign vector holds as
// a chance constraint; Unknown components impose nothing.
inline bool in_region(const KripkeStructure& k, int cell, const BeliefState& b) {
  const std::vector<Sign>& signs = k.cells[std::size_t(cell)].signs;
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] == Sign::Pos && !pred_holds(k.preds[i], b)) return false;
    if (signs[i] == Sign::Neg && !pred_holds(k.preds[i].negation(), b)) return false;
  }
  return true;
}

// Search-tree vertex. Progress is the current lasso position, K+1 once the loop
// region has been re-entered after position K (all regions traversed). The edge
// from the parent stores one belief, control, and position per dynamics step.
struct TreeVertex {
  BeliefState belief;
  int parent = -1;
  std::vector<Vec> controls;
  std::vector<BeliefState> edge_beliefs;
  std::vector<int> positions;
  int progress = 0;
  int cost = 0;  // dynamics steps from the root
  bool active = true;
  BeliefState entry;          // loop-entry belief, valid once progress reaches the loop index
  int entry_step = -1;        // root-relative step index of the entry belief
  std::vector<char> in_pos;   // cached region membership per lasso position
};

struct SearchTree {
  std::vector<TreeVertex> vertices;
};

// Per-position sampling data for a lasso: enclosure bounding boxes and
// empty-enclosure flags (empty regions are never selected).
struct SampleSpace {
  std::vector<int> cells;
  std::vector<std::pair<Vec, Vec>> bbox;
  std::vector<bool> empty;
};

inline SampleSpace make_sample_space(const KripkeStructure& k, const LassoPath& lasso) {
  SampleSpace s;
  s.cells = lasso.cells;
  for (int c : lasso.cells) {
    const Polytope& e = k.enclosures[std::size_t(c)];
    const bool emp = is_empty(e);
    s.empty.push_back(emp);
    s.bbox.push_back(emp ? std::pair<Vec, Vec>{Vec(), Vec()} : bounding_box(e));
  }
  return s;
}

// Region-selection weights: position k gets 1 / (1 + count of active vertices
// inside Q_k); empty-enclosure positions get weight 0.
inline std::vector<double> sample_weights(const SearchTree& tree, const KripkeStructure& k,
                                          const SampleSpace& space) {
  std::vector<double> w(space.cells.size(), 0.0);
  for (std::size_t pos = 0; pos < space.cells.size(); ++pos) {
    if (space.empty[pos]) continue;
    int count = 0;
    for (const TreeVertex& v : tree.vertices)
      if (v.active && in_region(k, space.cells[pos], v.belief)) ++count;
    w[pos] = 1.0 / (1.0 + double(count));
  }
  return w;
}

// Draw a target belief: a lasso position by the given weights, a mean uniform
// over the region's enclosure by rejection from its bounding box, and a
// covariance lambda * cov_max with lambda uniform in [0, 1). When rejection
// exhausts its budget the fallback perturbs a random active vertex's mean with
// Gaussian jitter at half the drain radius and keeps that vertex's covariance.
inline BeliefState sample_from(const std::vector<double>& w, const SearchTree& tree,
                               const KripkeStructure& k, const SampleSpace& space,
                               const SearchParams& params, RandomStream& rng) {
  double total = 0.0;
  for (double x : w) total += x;
  if (total <= 0.0) throw std::logic_error("sample: no selectable region");
  double pick = rng.uniform() * total;
  std::size_t pos = 0;
  for (; pos + 1 < w.size(); ++pos) {
    pick -= w[pos];
    if (pick < 0.0) break;
  }
  const Polytope& enc = k.enclosures[std::size_t(space.cells[pos])];
  const auto& [lo, hi] = space.bbox[pos];
  const Eigen::Index n = lo.size();
  for (int trial = 0; trial < 10000; ++trial) {
    Vec z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.uniform(lo[i], hi[i]);
    if (contains(enc, z)) return make_belief(z, rng.uniform() * k.cov_max);
  }
  std::vector<int> actives;
  for (std::size_t i = 0; i < tree.vertices.size(); ++i)
    if (tree.vertices[i].active) actives.push_back(int(i));
  if (actives.empty()) throw std::logic_error("sample: no active vertex");
  const TreeVertex& v = tree.vertices[std::size_t(actives[std::size_t(
      rng.uniform_int(0, int(actives.size()) - 1))])];
  Vec z = v.belief.mean;
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += 0.5 * params.delta_drain * rng.normal();
  return make_belief(z, v.belief.cov);
}

inline BeliefState sample(const SearchTree& tree, const KripkeStructure& k,
                          const SampleSpace& space, const SearchParams& params,
                          RandomStream& rng) {
  return sample_from(sample_weights(tree, k, space), tree, k, space, params, rng);
}

// Lowest-cost active vertex within delta_near of b_rand (ties: smaller trace,
// then smaller id); the nearest active vertex when the neighborhood is empty.
inline int best_nearest(const SearchTree& tree, const BeliefState& b_rand,
                        const SearchParams& params) {
  int best_in = -1, nearest = -1;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tree.vertices.size(); ++i) {
    const TreeVertex& v = tree.vertices[i];
    if (!v.active) continue;
    const double d = belief_distance(v.belief, b_rand, params.w_sigma);
    if (d < nearest_d) {
      nearest_d = d;
      nearest = int(i);
    }
    if (d > params.delta_near) continue;
    if (best_in < 0) {
      best_in = int(i);
      continue;
    }
    const TreeVertex& b = tree.vertices[std::size_t(best_in)];
    if (v.cost < b.cost ||
        (v.cost == b.cost && v.belief.cov.trace() < b.belief.cov.trace()))
      best_in = int(i);
  }
  if (nearest < 0) throw std::logic_error("best_nearest: no active vertex");
  return best_in >= 0 ? best_in : nearest;
}

struct PropagateResult {
  std::vector<BeliefState> beliefs;  // belief after each step
  std::vector<Vec> controls;         // one control per step
};

namespace detail {

// Uniform draw from an enclosure by rejection from its bounding box; falls back
// to the given point when the budget runs out.
inline Vec rejection_mean(const Polytope& enc, const std::pair<Vec, Vec>& bbox,
                          const Vec& fallback, RandomStream& rng) {
  const auto& [lo, hi] = bbox;
  for (int trial = 0; trial < 10000; ++trial) {
    Vec z(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) z[i] = rng.uniform(lo[i], hi[i]);
    if (contains(enc, z)) return z;
  }
  return fallback;
}

inline Mat stage_weight(const LinearSystem& sys, double mean_w, double cov_w) {
  const Eigen::Index n = sys.A.rows();
  const Eigen::Index ns = aug_dim(n);
  Vec d(ns);
  d.head(n).setConstant(mean_w);
  d.tail(ns - n).setConstant(cov_w);
  return d.asDiagonal();
}

// Shared rollout core: an infinite-horizon LQR mean-tracking nominal toward
// mu_final, then a re-run from b_near under finite-horizon belief-LQR gains
// applied as regulation toward the augmented goal s_goal.
inline PropagateResult tracked_rollout(const LinearSystem& sys, const BeliefState& b_near,
                                       const Vec& mu_final, const Vec& s_goal, int steps,
                                       const Mat& f_mean, const SearchParams& params) {
  std::vector<BeliefState> nominal{b_near};
  std::vector<Vec> nominal_u;
  for (int t = 0; t < steps; ++t) {
    const Vec u =
        clamp_control(-f_mean * (nominal.back().mean - mu_final), sys.Hu, sys.cu);
    nominal_u.push_back(u);
    nominal.push_back(mlo_step(sys, nominal.back(), u));
  }

  const Eigen::Index m = sys.B.cols();
  const Mat r = params.r_ctrl * Mat::Identity(m, m);
  const std::vector<Mat> gains =
      blqr(sys, nominal, nominal_u, stage_weight(sys, params.q_mean, params.q_cov),
           stage_weight(sys, params.qf_mean, params.qf_cov), r);

  PropagateResult out;
  BeliefState b = b_near;
  for (int t = 0; t < steps; ++t) {
    const Vec s = belief_to_aug(b);
    const Vec u = clamp_control(-gains[std::size_t(t)] * (s - s_goal), sys.Hu, sys.cu);
    b = mlo_step(sys, b, u);
    out.controls.push_back(u);
    out.beliefs.push_back(b);
  }
  return out;
}

}  // namespace detail

// Exploration rollout from b_near: pick a target region uniformly among the
// candidates, a target mean from its enclosure, and a duration in
// [t_min, t_max]; the augmented goal [mu_final; 0] makes the covariance block
// attract control as well.
inline PropagateResult propagate(const LinearSystem& sys, const BeliefState& b_near,
                                 const std::vector<const Polytope*>& targets,
                                 const Mat& f_mean, const SearchParams& params,
                                 RandomStream& rng) {
  if (targets.empty()) throw std::invalid_argument("propagate: no target region");
  const Polytope& enc =
      *targets[std::size_t(rng.uniform_int(0, int(targets.size()) - 1))];
  const Vec mu_final =
      detail::rejection_mean(enc, bounding_box(enc), b_near.mean, rng);
  const int T = rng.uniform_int(params.t_min, params.t_max);
  Vec s_goal = Vec::Zero(aug_dim(sys.A.rows()));
  s_goal.head(sys.A.rows()) = mu_final;
  return detail::tracked_rollout(sys, b_near, mu_final, s_goal, T, f_mean, params);
}

// Loop-branch rollout: once a vertex has traversed every region it tracks the
// recorded loop-entry belief itself, positioning candidates for exact closure.
inline PropagateResult propagate_loop(const LinearSystem& sys, const BeliefState& b_near,
                                      const BeliefState& entry, const Mat& f_mean,
                                      const SearchParams& params, RandomStream& rng) {
  const int T = rng.uniform_int(params.t_min, params.t_max);
  return detail::tracked_rollout(sys, b_near, entry.mean, belief_to_aug(entry), T, f_mean,
                                 params);
}

// Sparse-tree pruning around a just-added vertex: active neighbors within
// delta_drain that are strictly costlier with no more progress go inactive; if a
// strictly cheaper neighbor with at least its progress exists, the new vertex
// itself goes inactive. Edges are retained either way.
inline void drain(SearchTree& tree, int new_id, const SearchParams& params) {
  TreeVertex& nv = tree.vertices[std::size_t(new_id)];
  for (std::size_t i = 0; i < tree.vertices.size(); ++i) {
    if (int(i) == new_id) continue;
    TreeVertex& v = tree.vertices[i];
    if (!v.active) continue;
    if (belief_distance(v.belief, nv.belief, params.w_sigma) > params.delta_drain) continue;
    if (v.cost > nv.cost && v.progress <= nv.progress) v.active = false;
    if (v.cost < nv.cost && v.progress >= nv.progress) nv.active = false;
  }
}

namespace detail {

// Concatenate the root-to-leaf edges and the closure run into a Plan.
inline Plan assemble_plan(const SearchTree& tree, int leaf,
                          const std::vector<BeliefState>& closure_b,
                          const std::vector<Vec>& closure_u, int loop_pos) {
  std::vector<int> chain;
  for (int v = leaf; v >= 0; v = tree.vertices[std::size_t(v)].parent) chain.push_back(v);
  std::reverse(chain.begin(), chain.end());
  Plan plan;
  plan.beliefs.push_back(tree.vertices[std::size_t(chain.front())].belief);
  plan.index_map.push_back(0);
  for (std::size_t c = 1; c < chain.size(); ++c) {
    const TreeVertex& v = tree.vertices[std::size_t(chain[c])];
    plan.beliefs.insert(plan.beliefs.end(), v.edge_beliefs.begin(), v.edge_beliefs.end());
    plan.controls.insert(plan.controls.end(), v.controls.begin(), v.controls.end());
    plan.index_map.insert(plan.index_map.end(), v.positions.begin(), v.positions.end());
  }
  plan.beliefs.insert(plan.beliefs.end(), closure_b.begin(), closure_b.end());
  plan.controls.insert(plan.controls.end(), closure_u.begin(), closure_u.end());
  plan.index_map.insert(plan.index_map.end(), closure_b.size(), loop_pos);
  plan.loop_entry = tree.vertices[std::size_t(leaf)].entry_step;
  return plan;
}

}  // namespace detail

// Attempt loop closure from every wrapped vertex, cheapest first (ties: smaller
// trace, then smaller id): steer the mean back to the recorded entry belief with
// loop_controls and accept when every closure step stays in the loop region, the
// final mean matches within tol_loop, and the final covariance is dominated
// within tol_psd.
inline std::optional<Plan> feas_run(const SearchTree& tree, const LinearSystem& sys,
                                    const KripkeStructure& k, const LassoPath& lasso,
                                    const SearchParams& params) {
  const int K = lasso.K();
  const int L = lasso.loop_index;
  std::vector<int> cands;
  for (std::size_t i = 0; i < tree.vertices.size(); ++i)
    if (tree.vertices[i].progress == K + 1) cands.push_back(int(i));
  std::sort(cands.begin(), cands.end(), [&](int a, int b) {
    const TreeVertex& va = tree.vertices[std::size_t(a)];
    const TreeVertex& vb = tree.vertices[std::size_t(b)];
    if (va.cost != vb.cost) return va.cost < vb.cost;
    const double ta = va.belief.cov.trace(), tb = vb.belief.cov.trace();
    if (ta != tb) return ta < tb;
    return a < b;
  });
  for (int id : cands) {
    const TreeVertex& v = tree.vertices[std::size_t(id)];
    if (v.entry_step < 0) continue;
    LoopControls lc;
    try {
      lc = loop_controls(sys, v.belief.mean, v.entry.mean);
    } catch (const std::invalid_argument&) {
      return std::nullopt;  // rank-deficient controllability: closure impossible
    }
    std::vector<BeliefState> closure;
    BeliefState b = v.belief;
    bool ok = true;
    try {
      for (const Vec& u : lc.controls) {
        b = mlo_step(sys, b, u);
        if (!in_region(k, lasso.cells[std::size_t(L)], b)) {
          ok = false;
          break;
        }
        closure.push_back(b);
      }
    } catch (const std::runtime_error&) {
      ok = false;
    }
    if (!ok) continue;
    if ((b.mean - v.entry.mean).cwiseAbs().maxCoeff() >= params.tol_loop) continue;
    if (!psd_leq(b.cov, v.entry.cov, params.tol_psd)) continue;
    return detail::assemble_plan(tree, id, closure, lc.controls, L);
  }
  return std::nullopt;
}

// Feasibility search over max(K, 1) * n_iters expansions. Each iteration samples
// a target belief, extends the best near vertex via propagate, truncates the run
// at the first step outside both the current and successor regions, advances the
// per-step lasso position, records the loop-entry belief on arrival at the loop
// index, and prunes with drain; feas_run then extracts the cheapest closable plan.
inline std::optional<Plan> fsearch(const LinearSystem& sys, const KripkeStructure& kripke,
                                   const LassoPath& lasso, const BeliefState& b0,
                                   int n_iters, const SearchParams& params,
                                   RandomStream& rng) {
  const int K = lasso.K();
  const int L = lasso.loop_index;
  if (K < 0) throw std::invalid_argument("fsearch: empty lasso");
  if (L < 0 || L > K) throw std::invalid_argument("fsearch: loop index out of range");
  for (int c : lasso.cells)
    if (c < 0 || c >= kripke.num_cells())
      throw std::invalid_argument("fsearch: lasso cell out of range");
  if (n_iters < 1) throw std::invalid_argument("fsearch: n_iters must be positive");
  if (!in_region(kripke, lasso.cells[0], b0))
    throw std::invalid_argument("fsearch: initial belief outside the first region");

  const SampleSpace space = make_sample_space(kripke, lasso);
  const Eigen::Index n = sys.A.rows();
  const Eigen::Index m = sys.B.cols();
  const Mat f_mean = lqr(sys.A, sys.B, params.q_mean * Mat::Identity(n, n),
                         params.r_ctrl * Mat::Identity(m, m));

  SearchTree tree;
  const auto membership_flags = [&](const BeliefState& b) {
    std::vector<char> flags(lasso.cells.size(), 0);
    for (std::size_t pos = 0; pos < lasso.cells.size(); ++pos)
      flags[pos] = in_region(kripke, lasso.cells[pos], b) ? 1 : 0;
    return flags;
  };
  // Weights from the cached per-vertex membership flags; same rule as
  // sample_weights without re-evaluating the chance constraints.
  const auto fast_weights = [&]() {
    std::vector<double> w(lasso.cells.size(), 0.0);
    for (std::size_t pos = 0; pos < lasso.cells.size(); ++pos) {
      if (space.empty[pos]) continue;
      int count = 0;
      for (const TreeVertex& v : tree.vertices)
        if (v.active && v.in_pos[pos]) ++count;
      w[pos] = 1.0 / (1.0 + double(count));
    }
    return w;
  };

  TreeVertex root;
  root.belief = b0;
  // With a single position the root has already traversed every region and sits
  // in the loop region, so it wraps immediately.
  root.progress = K == 0 ? 1 : 0;
  if (L == 0) {
    root.entry = b0;
    root.entry_step = 0;
  }
  root.in_pos = membership_flags(b0);
  tree.vertices.push_back(std::move(root));

  const long budget = long(std::max(K, 1)) * long(n_iters);
  for (long iter = 0; iter < budget; ++iter) {
    const BeliefState b_rand = sample_from(fast_weights(), tree, kripke, space, params, rng);
    const int near = best_nearest(tree, b_rand, params);
    const TreeVertex v = tree.vertices[std::size_t(near)];

    PropagateResult prop;
    try {
      if (v.progress >= K && v.entry_step >= 0) {
        prop = propagate_loop(sys, v.belief, v.entry, f_mean, params, rng);
      } else {
        const int stay_cell = v.progress <= K ? lasso.cells[std::size_t(v.progress)]
                                              : lasso.cells[std::size_t(L)];
        const int succ_cell = v.progress < K ? lasso.cells[std::size_t(v.progress + 1)] : -1;
        std::vector<const Polytope*> targets{&kripke.enclosures[std::size_t(stay_cell)]};
        if (succ_cell >= 0) targets.push_back(&kripke.enclosures[std::size_t(succ_cell)]);
        prop = propagate(sys, v.belief, targets, f_mean, params, rng);
      }
    } catch (const std::runtime_error&) {
      continue;  // Riccati or innovation failure: skip this expansion
    }

    TreeVertex nv;
    nv.parent = near;
    nv.progress = v.progress;
    nv.entry = v.entry;
    nv.entry_step = v.entry_step;
    for (std::size_t t = 0; t < prop.beliefs.size(); ++t) {
      const BeliefState& b = prop.beliefs[t];
      int next_p;
      const int stay = nv.progress <= K ? lasso.cells[std::size_t(nv.progress)]
                                        : lasso.cells[std::size_t(L)];
      const int succ = nv.progress < K
                           ? lasso.cells[std::size_t(nv.progress + 1)]
                           : (nv.progress == K ? lasso.cells[std::size_t(L)] : -1);
      if (succ >= 0 && in_region(kripke, succ, b))
        next_p = nv.progress + 1;
      else if (in_region(kripke, stay, b))
        next_p = nv.progress;
      else
        break;  // truncate the edge before this step
      if (L > 0 && next_p == L && nv.progress == L - 1) {
        nv.entry = b;
        nv.entry_step = v.cost + int(t) + 1;
      }
      // Arriving at position K already inside the loop region completes the wrap.
      if (next_p == K && in_region(kripke, lasso.cells[std::size_t(L)], b)) next_p = K + 1;
      nv.positions.push_back(next_p <= K ? next_p : L);
      nv.progress = next_p;
      nv.controls.push_back(prop.controls[t]);
      nv.edge_beliefs.push_back(b);
    }
    if (nv.controls.empty()) continue;
    nv.belief = nv.edge_beliefs.back();
    nv.cost = v.cost + int(nv.controls.size());
    nv.in_pos = membership_flags(nv.belief);
    tree.vertices.push_back(std::move(nv));
    drain(tree, int(tree.vertices.size()) - 1, params);
  }
  return feas_run(tree, sys, kripke, lasso, params);
}

}  // namespace prtlplan
