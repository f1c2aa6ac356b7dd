#pragma once

// Top-level synthesis: propose satisfying lassos by bounded model checking,
// realize them with the feasibility search, block the failures, and repeat.
// Also houses plan validation (replay, conformance, closure) and Monte Carlo
// execution of a plan against the true stochastic dynamics.

#include <algorithm>
#include <chrono>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "prtlplan/abstraction.hpp"
#include "prtlplan/bmc.hpp"
#include "prtlplan/fsearch.hpp"
#include "prtlplan/scenario.hpp"

namespace prtlplan {

enum class SynthOutcome {
  PlanFound,
  InfeasibleAbstraction,  // no satisfying lasso with K <= k_max exists at all
  InfeasibleBudget,       // lassos existed but every proposal failed the search
};

struct SynthStatistics {
  int lassos_proposed = 0;
  int lassos_blocked = 0;
  double wall_seconds = 0.0;
  unsigned long seed = 0;
};

struct SynthesisResult {
  SynthOutcome outcome = SynthOutcome::InfeasibleAbstraction;
  std::optional<Plan> plan;
  LassoPath lasso;  // the realized lasso when a plan was found
  SynthStatistics stats;
};

inline int exit_code(const SynthesisResult& r) {
  switch (r.outcome) {
    case SynthOutcome::PlanFound: return 0;
    case SynthOutcome::InfeasibleAbstraction: return 2;
    case SynthOutcome::InfeasibleBudget: return 3;
  }
  return 3;
}

inline KripkeStructure build_scenario_kripke(const Scenario& sc) {
  return build_kripke(extract_subformulas(sc.formula), sc.init, sc.cov_max, sc.workspace());
}

// Counterexample-guided loop: the blocklist realizes the product with the
// complement of each failed lasso, so every outer iteration strictly shrinks
// the candidate set and the loop terminates.
inline SynthesisResult id_prtl(const Scenario& sc) {
  const auto t0 = std::chrono::steady_clock::now();
  const AbstractedFormula af = extract_subformulas(sc.formula);
  const KripkeStructure kripke = build_kripke(af, sc.init, sc.cov_max, sc.workspace());
  Blocklist blocked;
  RandomStream rng(sc.seed);  // one stream across all search calls: reproducible
  SynthesisResult res;
  res.stats.seed = sc.seed;
  for (;;) {
    const FindLassoResult fl = find_lasso(kripke, af.skeleton, sc.k_max, blocked);
    if (fl.status != LassoStatus::Found) {
      res.outcome = res.stats.lassos_proposed == 0 ? SynthOutcome::InfeasibleAbstraction
                                                   : SynthOutcome::InfeasibleBudget;
      break;
    }
    ++res.stats.lassos_proposed;
    auto plan = fsearch(sc.system, kripke, fl.lasso, sc.init, sc.n_iters, sc.search, rng);
    if (plan) {
      res.outcome = SynthOutcome::PlanFound;
      res.plan = std::move(plan);
      res.lasso = fl.lasso;
      break;
    }
    blocked.block(fl.lasso);
    ++res.stats.lassos_blocked;
  }
  const auto t1 = std::chrono::steady_clock::now();
  res.stats.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  return res;
}

struct CheckReport {
  bool ok = true;
  int step = -1;          // first violating plan step; -1 for structural failures
  std::string violation;  // empty when the plan checks out
};

// Full plan audit: structure, initial belief, input admissibility, per-step
// dynamics replay, lasso-position shape, per-step chance constraints by region,
// and loop mean/covariance closure. Reports the first violation found.
inline CheckReport check_plan(const Plan& plan, const LassoPath& lasso, const Scenario& sc) {
  CheckReport rep;
  const auto fail = [&rep](int step, std::string msg) {
    rep.ok = false;
    rep.step = step;
    rep.violation = std::move(msg);
  };

  const int h = plan.horizon();
  if (h < 1) {
    fail(-1, "plan has no steps");
    return rep;
  }
  if (int(plan.beliefs.size()) != h + 1 || int(plan.index_map.size()) != h + 1) {
    fail(-1, "belief and index-map lengths do not match the control count");
    return rep;
  }
  const int K = lasso.K();
  const int L = lasso.loop_index;
  if (K < 0 || L < 0 || L > K) {
    fail(-1, "lasso is malformed");
    return rep;
  }
  const KripkeStructure kripke = build_scenario_kripke(sc);
  for (int c : lasso.cells)
    if (c < 0 || c >= kripke.num_cells()) {
      fail(-1, "lasso cell out of range for the scenario abstraction");
      return rep;
    }
  if (plan.loop_entry < 0 || plan.loop_entry >= h) {
    fail(-1, "loop entry must lie strictly inside the plan");
    return rep;
  }

  const double tol_replay = 1e-9;
  if ((plan.beliefs[0].mean - sc.init.mean).cwiseAbs().maxCoeff() > tol_replay ||
      (plan.beliefs[0].cov - sc.init.cov).cwiseAbs().maxCoeff() > tol_replay) {
    fail(0, "initial belief does not match the scenario");
    return rep;
  }

  for (int t = 0; t < h; ++t) {
    const Vec& u = plan.controls[std::size_t(t)];
    if (!input_ok(sc.system, u)) {
      fail(t, "control outside the input set");
      return rep;
    }
    BeliefState next;
    try {
      next = mlo_step(sc.system, plan.beliefs[std::size_t(t)], u);
    } catch (const std::invalid_argument& e) {
      fail(t, std::string("dynamics step failed: ") + e.what());
      return rep;
    }
    const BeliefState& claimed = plan.beliefs[std::size_t(t) + 1];
    if ((next.mean - claimed.mean).cwiseAbs().maxCoeff() > tol_replay ||
        (next.cov - claimed.cov).cwiseAbs().maxCoeff() > tol_replay) {
      fail(t + 1, "dynamics replay mismatch");
      return rep;
    }
  }

  // Position shape: start at 0, advance by at most one, drop K -> L exactly
  // once when L < K, stay at L afterwards, and traverse every position.
  if (plan.index_map[0] != 0) {
    fail(0, "position trace must start at 0");
    return rep;
  }
  bool dropped = false;
  int max_pos = 0;
  for (int t = 1; t <= h; ++t) {
    const int cur = plan.index_map[std::size_t(t) - 1];
    const int nxt = plan.index_map[std::size_t(t)];
    if (nxt < 0 || nxt > K) {
      fail(t, "position outside the lasso");
      return rep;
    }
    const bool legal = dropped ? nxt == L
                               : nxt == cur || (cur < K && nxt == cur + 1) ||
                                     (cur == K && L < K && nxt == L);
    if (!legal) {
      fail(t, "position trace is not a lasso traversal");
      return rep;
    }
    if (!dropped && cur == K && nxt == L && L < K) dropped = true;
    max_pos = std::max(max_pos, nxt);
  }
  if (max_pos != K) {
    fail(h, "plan never traverses the full lasso");
    return rep;
  }
  if (plan.index_map[std::size_t(plan.loop_entry)] != L) {
    fail(plan.loop_entry, "loop entry is not at the loop position");
    return rep;
  }

  for (int t = 0; t <= h; ++t) {
    const int cell = lasso.cells[std::size_t(plan.index_map[std::size_t(t)])];
    if (!in_region(kripke, cell, plan.beliefs[std::size_t(t)])) {
      fail(t, "chance constraint violated in the planned region");
      return rep;
    }
  }

  const BeliefState& entry = plan.beliefs[std::size_t(plan.loop_entry)];
  const BeliefState& last = plan.beliefs.back();
  if ((last.mean - entry.mean).cwiseAbs().maxCoeff() >= sc.search.tol_loop) {
    fail(h, "loop mean closure exceeds tol_loop");
    return rep;
  }
  if (!psd_leq(last.cov, entry.cov, sc.search.tol_psd)) {
    fail(h, "loop covariance closure violates the PSD bound");
    return rep;
  }
  return rep;
}

// One Monte Carlo row: at plan step `step` the planned region claims the
// predicate `pred_index` with the given sign (true = negation claimed), and the
// frequencies are over rollouts of the realized belief satisfying the claim and
// the true state satisfying the claim's linear inequality.
struct ClaimStat {
  int step = 0;
  int pred_index = 0;
  bool claim_negated = false;
  double belief_freq = 0.0;
  double state_freq = 0.0;
};

struct MonteCarloReport {
  int rollouts = 0;
  unsigned long seed = 0;
  std::vector<Predicate> predicates;  // legend for pred_index
  std::vector<ClaimStat> claims;      // ordered by (step, pred_index)
};

// Execute the open-loop plan M times against the true stochastic dynamics:
// x0 ~ b0, then simulate_step + kalman_update per control. Rollout r uses the
// derived seed (seed + r), so any partition of the index range merges to the
// same integer counts and the report is deterministic.
inline MonteCarloReport monte_carlo(const Plan& plan, const LassoPath& lasso, const Scenario& sc,
                                    int rollouts, unsigned long seed) {
  if (rollouts < 1) throw std::invalid_argument("monte_carlo: rollouts must be >= 1");
  const int h = plan.horizon();
  if (int(plan.beliefs.size()) != h + 1 || int(plan.index_map.size()) != h + 1 || h < 1)
    throw std::invalid_argument("monte_carlo: malformed plan");
  const KripkeStructure kripke = build_scenario_kripke(sc);
  for (int c : lasso.cells)
    if (c < 0 || c >= kripke.num_cells())
      throw std::invalid_argument("monte_carlo: lasso cell out of range");
  for (int pos : plan.index_map)
    if (pos < 0 || pos > lasso.K())
      throw std::invalid_argument("monte_carlo: plan position outside the lasso");

  MonteCarloReport rep;
  rep.rollouts = rollouts;
  rep.seed = seed;
  rep.predicates = kripke.preds;

  // Flatten the per-step claims once; rollouts accumulate into parallel counters.
  std::vector<ClaimStat> rows;
  std::vector<std::vector<Predicate>> step_claims(std::size_t(h) + 1);
  for (int t = 0; t <= h; ++t) {
    const int cell = lasso.cells[std::size_t(plan.index_map[std::size_t(t)])];
    const std::vector<Sign>& signs = kripke.cells[std::size_t(cell)].signs;
    for (std::size_t i = 0; i < signs.size(); ++i) {
      if (signs[i] == Sign::Unknown) continue;
      const bool negated = signs[i] == Sign::Neg;
      step_claims[std::size_t(t)].push_back(negated ? kripke.preds[i].negation()
                                                    : kripke.preds[i]);
      ClaimStat row;
      row.step = t;
      row.pred_index = int(i);
      row.claim_negated = negated;
      rows.push_back(row);
    }
  }

  const auto run_chunk = [&](int lo, int hi, std::vector<long>& belief_hits,
                             std::vector<long>& state_hits) {
    const Mat sqrt0 = psd_cholesky_lower(clamp_psd(sc.init.cov));
    const Eigen::Index n = sc.system.n();
    for (int r = lo; r < hi; ++r) {
      RandomStream rng(seed + static_cast<std::uint64_t>(r));
      Vec z(n);
      for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
      Vec x = sc.init.mean + sqrt0 * z;
      BeliefState b = sc.init;
      std::size_t row = 0;
      for (int t = 0; t <= h; ++t) {
        if (t > 0) {
          const Vec& u = plan.controls[std::size_t(t) - 1];
          auto [x_next, y] = simulate_step(sc.system, x, u, rng);
          x = x_next;
          b = kalman_update(sc.system, b, u, y);
        }
        for (const Predicate& claim : step_claims[std::size_t(t)]) {
          if (pred_holds(claim, b)) ++belief_hits[row];
          if (claim.eff_c().dot(x) <= claim.eff_b()) ++state_hits[row];
          ++row;
        }
      }
    }
  };

  const int workers = std::max(1, std::min<int>(int(std::thread::hardware_concurrency()),
                                                rollouts / 64));
  std::vector<std::vector<long>> belief_parts(std::size_t(workers),
                                              std::vector<long>(rows.size(), 0));
  std::vector<std::vector<long>> state_parts = belief_parts;
  std::vector<std::exception_ptr> errors{std::size_t(workers)};
  const auto guarded = [&](int w, int lo, int hi) {
    try {
      run_chunk(lo, hi, belief_parts[std::size_t(w)], state_parts[std::size_t(w)]);
    } catch (...) {
      errors[std::size_t(w)] = std::current_exception();
    }
  };
  if (workers == 1) {
    guarded(0, 0, rollouts);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (rollouts + workers - 1) / workers;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back(guarded, w, w * chunk, std::min(rollouts, (w + 1) * chunk));
    for (std::thread& th : pool) th.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t i = 0; i < rows.size(); ++i) {
    long b_hits = 0, s_hits = 0;
    for (int w = 0; w < workers; ++w) {
      b_hits += belief_parts[std::size_t(w)][i];
      s_hits += state_parts[std::size_t(w)][i];
    }
    rows[i].belief_freq = double(b_hits) / double(rollouts);
    rows[i].state_freq = double(s_hits) / double(rollouts);
  }
  rep.claims = std::move(rows);
  return rep;
}

}  // namespace prtlplan
