// prtlplan command-line driver: plan synthesis, plan auditing, Monte Carlo
// validation, abstraction dumps, and formula parsing. Every error path exits
// nonzero with a single "error: ..." line on stderr; wall-clock timings go to
// stderr so file outputs stay byte-reproducible.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "prtlplan/scenario.hpp"
#include "prtlplan/serialize.hpp"
#include "prtlplan/synth.hpp"

namespace {

using namespace prtlplan;

// PRTLPLAN_LOG=quiet|info|debug (default info) gates stderr chatter.
int log_level() {
  static const int level = [] {
    const char* env = std::getenv("PRTLPLAN_LOG");
    if (env == nullptr) return 1;
    const std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << "\n";
}

std::string single_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

std::string csv_path_for(const std::string& out) {
  const std::size_t slash = out.find_last_of('/');
  const std::size_t dot = out.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return out + ".csv";
  return out.substr(0, dot) + ".csv";
}

int run_plan(const std::string& scenario_path, const std::string& out, long seed_flag,
             int k_max_flag, int iters_flag) {
  Scenario sc = load_scenario(scenario_path);
  if (seed_flag >= 0) sc.seed = static_cast<unsigned long>(seed_flag);
  if (k_max_flag >= 0) sc.k_max = k_max_flag;
  if (iters_flag >= 1) sc.n_iters = iters_flag;
  log_info("plan: scenario=" + sc.name + " seed=" + std::to_string(sc.seed) +
           " k_max=" + std::to_string(sc.k_max) + " n_iters=" + std::to_string(sc.n_iters));
  const SynthesisResult res = id_prtl(sc);
  {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", res.stats.wall_seconds);
    log_info("plan: proposed=" + std::to_string(res.stats.lassos_proposed) +
             " blocked=" + std::to_string(res.stats.lassos_blocked) + " wall_seconds=" + buf);
  }
  if (res.outcome == SynthOutcome::InfeasibleAbstraction) {
    std::cout << "infeasible: no satisfying lasso with K <= " << sc.k_max
              << " exists in the abstraction\n";
    return exit_code(res);
  }
  if (res.outcome == SynthOutcome::InfeasibleBudget) {
    std::cout << "infeasible: all " << res.stats.lassos_blocked
              << " proposed lassos failed the feasibility search\n";
    return exit_code(res);
  }
  PlanFile pf;
  pf.scenario_name = sc.name;
  pf.lasso = res.lasso;
  pf.plan = *res.plan;
  pf.lassos_proposed = res.stats.lassos_proposed;
  pf.lassos_blocked = res.stats.lassos_blocked;
  pf.seed = res.stats.seed;
  write_text_file(out, json_text(plan_file_to_json(pf)));
  const std::string csv = csv_path_for(out);
  write_text_file(csv, plan_to_csv(pf.plan, pf.lasso));
  std::cout << "plan found: horizon=" << pf.plan.horizon() << " loop_entry=" << pf.plan.loop_entry
            << " lasso_k=" << pf.lasso.K() << " out=" << out << " csv=" << csv << "\n";
  return exit_code(res);
}

int run_check(const std::string& plan_path, const std::string& scenario_path) {
  const PlanFile pf = plan_file_from_json(read_json_file(plan_path));
  const Scenario sc = load_scenario(scenario_path);
  const CheckReport rep = check_plan(pf.plan, pf.lasso, sc);
  if (rep.ok) {
    std::cout << "ok\n";
    return 0;
  }
  std::cout << "violation: step=" << rep.step << " " << rep.violation << "\n";
  return 1;
}

int run_montecarlo(const std::string& plan_path, const std::string& scenario_path, int rollouts,
                   long seed_flag, const std::string& out) {
  const PlanFile pf = plan_file_from_json(read_json_file(plan_path));
  const Scenario sc = load_scenario(scenario_path);
  const unsigned long seed = seed_flag >= 0 ? static_cast<unsigned long>(seed_flag) : sc.seed;
  const MonteCarloReport rep = monte_carlo(pf.plan, pf.lasso, sc, rollouts, seed);
  const std::string text = json_text(mc_report_to_json(rep));
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text_file(out, text);
    std::cout << "montecarlo: rollouts=" << rep.rollouts << " claims=" << rep.claims.size()
              << " out=" << out << "\n";
  }
  return 0;
}

int run_abstract(const std::string& scenario_path, const std::string& dump) {
  const Scenario sc = load_scenario(scenario_path);
  const KripkeStructure k = build_scenario_kripke(sc);
  write_text_file(dump, json_text(kripke_to_json(k)));
  std::cout << "kripke: cells=" << k.num_cells() << " initial=" << k.initial
            << " pruned=" << k.pruned_count << " out=" << dump << "\n";
  return 0;
}

// Debug aid: names that are not keywords get placeholder predicates so bare
// formulas parse without a scenario.
int run_parse(const std::string& text) {
  static const std::set<std::string> keywords{"F", "G", "U", "R", "X", "p", "true", "false"};
  std::map<std::string, Predicate> atoms;
  const std::regex ident("[A-Za-z_][A-Za-z0-9_]*");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), ident);
       it != std::sregex_iterator(); ++it) {
    const std::string name = it->str();
    if (keywords.count(name) || atoms.count(name)) continue;
    atoms.emplace(name, Predicate(Vec::Ones(1), 0.0, 0.05));
  }
  std::cout << pretty_print(parse_formula(text, atoms)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"belief-space plan synthesis for PRTL specifications"};
  app.require_subcommand(1);

  std::string scenario_path, plan_path, out = "plan.json", mc_out, dump = "kripke.json";
  std::string formula_text;
  long seed_flag = -1;
  int k_max_flag = -1, iters_flag = 0, rollouts = 0;

  CLI::App* plan = app.add_subcommand("plan", "synthesize a plan for a scenario");
  plan->add_option("scenario", scenario_path, "scenario JSON file")->required();
  plan->add_option("--seed", seed_flag, "override the scenario seed");
  plan->add_option("--k-max", k_max_flag, "override the lasso length bound");
  plan->add_option("--iters", iters_flag, "override the per-lasso iteration budget");
  plan->add_option("--out", out, "plan output path (CSV companion alongside)");

  CLI::App* check = app.add_subcommand("check", "audit a plan against its scenario");
  check->add_option("plan", plan_path, "plan JSON file")->required();
  check->add_option("scenario", scenario_path, "scenario JSON file")->required();

  CLI::App* mc = app.add_subcommand("montecarlo", "validate a plan by stochastic rollouts");
  mc->add_option("plan", plan_path, "plan JSON file")->required();
  mc->add_option("scenario", scenario_path, "scenario JSON file")->required();
  mc->add_option("--rollouts", rollouts, "number of rollouts")->required();
  mc->add_option("--seed", seed_flag, "rollout seed (default: scenario seed)");
  mc->add_option("--out", mc_out, "write the report here instead of stdout");

  CLI::App* abs = app.add_subcommand("abstract", "dump the belief-space abstraction");
  abs->add_option("scenario", scenario_path, "scenario JSON file")->required();
  abs->add_option("--dump-kripke", dump, "abstraction dump path");

  CLI::App* parse = app.add_subcommand("parse", "pretty-print a formula's structure");
  parse->add_option("formula", formula_text, "PRTL formula text")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << single_line(e.what()) << "\n";
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    if (plan->parsed()) return run_plan(scenario_path, out, seed_flag, k_max_flag, iters_flag);
    if (check->parsed()) return run_check(plan_path, scenario_path);
    if (mc->parsed()) return run_montecarlo(plan_path, scenario_path, rollouts, seed_flag, mc_out);
    if (abs->parsed()) return run_abstract(scenario_path, dump);
    if (parse->parsed()) return run_parse(formula_text);
  } catch (const std::exception& e) {
    std::cerr << "error: " << single_line(e.what()) << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
