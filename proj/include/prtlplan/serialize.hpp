#pragma once

// Artifact formats: plan.json (plan + lasso + deterministic statistics),
// plan.csv (per-step rows for plotting), kripke.json (abstraction dump), and
// mc_report.json. JSON numbers round-trip exactly (shortest representation);
// CSV doubles are emitted with std::to_chars for the same guarantee.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "prtlplan/abstraction.hpp"
#include "prtlplan/synth.hpp"

namespace prtlplan {

namespace detail {

[[noreturn]] inline void plan_fail(const std::string& field, const std::string& constraint) {
  throw std::invalid_argument("plan: " + field + ": " + constraint);
}

inline const Json& plan_field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) plan_fail(path.empty() ? key : path, "must be an object");
  const auto it = j.find(key);
  if (it == j.end()) plan_fail(path.empty() ? key : path + "." + key, "missing required field");
  return *it;
}

inline double plan_number(const Json& j, const std::string& path) {
  if (!j.is_number()) plan_fail(path, "must be a number");
  return j.get<double>();
}

inline long plan_integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) plan_fail(path, "must be an integer");
  return j.get<long>();
}

inline Vec plan_vec(const Json& j, const std::string& path) {
  if (!j.is_array()) plan_fail(path, "must be an array of numbers");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v[Eigen::Index(i)] = plan_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

inline Mat plan_mat(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) plan_fail(path, "must be a nonempty array of rows");
  Mat m;
  std::size_t cols = 0;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vec row = plan_vec(j[r], path + "[" + std::to_string(r) + "]");
    if (r == 0) {
      cols = std::size_t(row.size());
      m.resize(Eigen::Index(j.size()), Eigen::Index(cols));
    } else if (std::size_t(row.size()) != cols) {
      plan_fail(path, "rows must all have the same length");
    }
    m.row(Eigen::Index(r)) = row.transpose();
  }
  return m;
}

// Shortest decimal form that parses back to the identical double.
inline std::string double_repr(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
  return rows;
}

inline Json predicate_to_json(const Predicate& p) {
  Json j = Json::object();
  j["c"] = vec_to_json(p.c);
  j["b"] = p.b;
  j["eps"] = p.eps;
  j["negated"] = p.negated;
  return j;
}

inline Json lasso_to_json(const LassoPath& lasso) {
  Json j = Json::object();
  j["cells"] = lasso.cells;
  j["loop_index"] = lasso.loop_index;
  return j;
}

inline LassoPath lasso_from_json(const Json& j, const std::string& path = "lasso") {
  using detail::plan_fail;
  using detail::plan_field;
  const Json& cellsj = plan_field(j, "cells", path);
  if (!cellsj.is_array() || cellsj.empty()) plan_fail(path + ".cells", "must be a nonempty array");
  LassoPath lasso;
  for (std::size_t i = 0; i < cellsj.size(); ++i)
    lasso.cells.push_back(
        int(detail::plan_integer(cellsj[i], path + ".cells[" + std::to_string(i) + "]")));
  lasso.loop_index =
      int(detail::plan_integer(plan_field(j, "loop_index", path), path + ".loop_index"));
  return lasso;
}

inline Json plan_to_json(const Plan& plan) {
  Json beliefs = Json::array();
  for (const BeliefState& b : plan.beliefs) {
    Json bj = Json::object();
    bj["mean"] = vec_to_json(b.mean);
    bj["cov"] = mat_to_json(b.cov);
    beliefs.push_back(std::move(bj));
  }
  Json controls = Json::array();
  for (const Vec& u : plan.controls) controls.push_back(vec_to_json(u));
  Json j = Json::object();
  j["beliefs"] = std::move(beliefs);
  j["controls"] = std::move(controls);
  j["index_map"] = plan.index_map;
  j["loop_entry"] = plan.loop_entry;
  return j;
}

inline Plan plan_from_json(const Json& j, const std::string& path = "plan") {
  using detail::plan_fail;
  using detail::plan_field;
  const Json& beliefsj = plan_field(j, "beliefs", path);
  if (!beliefsj.is_array() || beliefsj.empty())
    plan_fail(path + ".beliefs", "must be a nonempty array");
  Plan plan;
  for (std::size_t i = 0; i < beliefsj.size(); ++i) {
    const std::string bp = path + ".beliefs[" + std::to_string(i) + "]";
    BeliefState b;
    b.mean = detail::plan_vec(plan_field(beliefsj[i], "mean", bp), bp + ".mean");
    b.cov = detail::plan_mat(plan_field(beliefsj[i], "cov", bp), bp + ".cov");
    if (b.cov.rows() != b.mean.size() || b.cov.cols() != b.mean.size())
      plan_fail(bp + ".cov", "must be square with the mean's dimension");
    plan.beliefs.push_back(std::move(b));
  }
  const Json& controlsj = plan_field(j, "controls", path);
  if (!controlsj.is_array()) plan_fail(path + ".controls", "must be an array");
  for (std::size_t i = 0; i < controlsj.size(); ++i)
    plan.controls.push_back(
        detail::plan_vec(controlsj[i], path + ".controls[" + std::to_string(i) + "]"));
  const Json& indexj = plan_field(j, "index_map", path);
  if (!indexj.is_array()) plan_fail(path + ".index_map", "must be an array");
  for (std::size_t i = 0; i < indexj.size(); ++i)
    plan.index_map.push_back(
        int(detail::plan_integer(indexj[i], path + ".index_map[" + std::to_string(i) + "]")));
  plan.loop_entry =
      int(detail::plan_integer(plan_field(j, "loop_entry", path), path + ".loop_entry"));
  return plan;
}

// The on-disk plan artifact. Statistics keep only reproducible fields: wall
// time varies run to run and would break byte-identical outputs.
struct PlanFile {
  std::string scenario_name;
  LassoPath lasso;
  Plan plan;
  int lassos_proposed = 0;
  int lassos_blocked = 0;
  unsigned long seed = 0;
};

inline Json plan_file_to_json(const PlanFile& pf) {
  Json j = Json::object();
  j["format_version"] = kFormatVersion;
  j["scenario_name"] = pf.scenario_name;
  j["outcome"] = "plan_found";
  j["lasso"] = lasso_to_json(pf.lasso);
  j["plan"] = plan_to_json(pf.plan);
  Json stats = Json::object();
  stats["lassos_proposed"] = pf.lassos_proposed;
  stats["lassos_blocked"] = pf.lassos_blocked;
  stats["seed"] = pf.seed;
  j["statistics"] = std::move(stats);
  return j;
}

inline PlanFile plan_file_from_json(const Json& j) {
  using detail::plan_fail;
  using detail::plan_field;
  if (!j.is_object()) plan_fail("root", "must be a JSON object");
  if (detail::plan_integer(plan_field(j, "format_version", ""), "format_version") !=
      kFormatVersion)
    plan_fail("format_version", "must be " + std::to_string(kFormatVersion));
  const Json& outcome = plan_field(j, "outcome", "");
  if (!outcome.is_string() || outcome.get<std::string>() != "plan_found")
    plan_fail("outcome", "must be \"plan_found\"");
  PlanFile pf;
  const Json& name = plan_field(j, "scenario_name", "");
  if (!name.is_string()) plan_fail("scenario_name", "must be a string");
  pf.scenario_name = name.get<std::string>();
  pf.lasso = lasso_from_json(plan_field(j, "lasso", ""));
  pf.plan = plan_from_json(plan_field(j, "plan", ""));
  const Json& stats = plan_field(j, "statistics", "");
  pf.lassos_proposed =
      int(detail::plan_integer(plan_field(stats, "lassos_proposed", "statistics"),
                               "statistics.lassos_proposed"));
  pf.lassos_blocked =
      int(detail::plan_integer(plan_field(stats, "lassos_blocked", "statistics"),
                               "statistics.lassos_blocked"));
  const long seed =
      detail::plan_integer(plan_field(stats, "seed", "statistics"), "statistics.seed");
  if (seed < 0) plan_fail("statistics.seed", "must be >= 0");
  pf.seed = static_cast<unsigned long>(seed);
  return pf;
}

// One row per time index t = 0..H: mean, covariance diagonal, control (blank
// on the terminal row), and the cell id of the planned region.
inline std::string plan_to_csv(const Plan& plan, const LassoPath& lasso) {
  const Eigen::Index n = plan.beliefs.front().mean.size();
  const Eigen::Index m = plan.controls.empty() ? 0 : plan.controls.front().size();
  std::ostringstream out;
  out << "# format_version: " << kFormatVersion << "\n";
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",mu_" << (i + 1);
  for (Eigen::Index i = 0; i < n; ++i) out << ",var_" << (i + 1);
  for (Eigen::Index i = 0; i < m; ++i) out << ",u_" << (i + 1);
  out << ",region\n";
  for (std::size_t t = 0; t < plan.beliefs.size(); ++t) {
    const BeliefState& b = plan.beliefs[t];
    out << t;
    for (Eigen::Index i = 0; i < n; ++i) out << "," << detail::double_repr(b.mean[i]);
    for (Eigen::Index i = 0; i < n; ++i) out << "," << detail::double_repr(b.cov(i, i));
    for (Eigen::Index i = 0; i < m; ++i) {
      out << ",";
      if (t < plan.controls.size()) out << detail::double_repr(plan.controls[t][i]);
    }
    out << "," << lasso.cells[std::size_t(plan.index_map[t])] << "\n";
  }
  return out.str();
}

struct PlanCsvRow {
  long t = 0;
  Vec mean;
  Vec var;
  Vec control;  // size 0 on the terminal row
  int region = -1;
};

// Parses plan_to_csv output; every numeric field comes back bit-identical.
inline std::vector<PlanCsvRow> plan_csv_parse(const std::string& text) {
  using detail::plan_fail;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "# format_version: " + std::to_string(kFormatVersion))
    plan_fail("csv", "first line must declare format_version " + std::to_string(kFormatVersion));
  if (!std::getline(in, line)) plan_fail("csv", "missing header row");
  std::size_t n = 0, m = 0;
  {
    std::istringstream header(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(header, col, ',')) cols.push_back(col);
    if (cols.size() < 2 || cols.front() != "t" || cols.back() != "region")
      plan_fail("csv", "header must run from t to region");
    for (const std::string& c : cols) {
      if (c.rfind("mu_", 0) == 0) ++n;
      if (c.rfind("u_", 0) == 0) ++m;
    }
    if (cols.size() != 2 + 2 * n + m) plan_fail("csv", "header must list mu, var, u, region");
  }
  std::vector<PlanCsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    std::vector<std::string> fields;
    while (std::getline(cells, cell, ',')) fields.push_back(cell);
    if (line.back() == ',') fields.push_back("");
    const std::string where = "csv row " + std::to_string(rows.size());
    if (fields.size() != 2 + 2 * n + m) plan_fail(where, "wrong field count");
    const auto num = [&](const std::string& s) {
      double v = 0.0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        plan_fail(where, "malformed number '" + s + "'");
      return v;
    };
    PlanCsvRow row;
    row.t = long(num(fields[0]));
    row.mean.resize(Eigen::Index(n));
    row.var.resize(Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i) row.mean[Eigen::Index(i)] = num(fields[1 + i]);
    for (std::size_t i = 0; i < n; ++i) row.var[Eigen::Index(i)] = num(fields[1 + n + i]);
    std::size_t filled = 0;
    for (std::size_t i = 0; i < m; ++i) filled += fields[1 + 2 * n + i].empty() ? 0 : 1;
    if (filled != 0 && filled != m) plan_fail(where, "control fields must be all set or all blank");
    row.control.resize(Eigen::Index(filled == m ? m : 0));
    for (std::size_t i = 0; i < m && filled == m; ++i)
      row.control[Eigen::Index(i)] = num(fields[1 + 2 * n + i]);
    row.region = int(num(fields[1 + 2 * n + m]));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) plan_fail("csv", "no data rows");
  return rows;
}

inline Json kripke_to_json(const KripkeStructure& k) {
  Json j = Json::object();
  j["format_version"] = kFormatVersion;
  Json preds = Json::array();
  for (const Predicate& p : k.preds) preds.push_back(predicate_to_json(p));
  j["predicates"] = std::move(preds);
  j["cov_max"] = mat_to_json(k.cov_max);
  j["initial"] = k.initial;
  j["pruned_count"] = k.pruned_count;
  Json cells = Json::array();
  for (int c = 0; c < k.num_cells(); ++c) {
    Json cj = Json::object();
    cj["id"] = k.cells[std::size_t(c)].id;
    cj["signs"] = cell_name(k.cells[std::size_t(c)]);
    cj["labels"] = k.labels[std::size_t(c)];
    cj["adjacency"] = k.adjacency[std::size_t(c)];
    Json enc = Json::object();
    enc["H"] = mat_to_json(k.enclosures[std::size_t(c)].H);
    enc["g"] = vec_to_json(k.enclosures[std::size_t(c)].g);
    cj["enclosure"] = std::move(enc);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

inline Json mc_report_to_json(const MonteCarloReport& rep) {
  Json j = Json::object();
  j["format_version"] = kFormatVersion;
  j["rollouts"] = rep.rollouts;
  j["seed"] = rep.seed;
  Json preds = Json::array();
  for (const Predicate& p : rep.predicates) preds.push_back(predicate_to_json(p));
  j["predicates"] = std::move(preds);
  Json claims = Json::array();
  for (const ClaimStat& c : rep.claims) {
    Json cj = Json::object();
    cj["step"] = c.step;
    cj["pred_index"] = c.pred_index;
    cj["claim_negated"] = c.claim_negated;
    cj["belief_freq"] = c.belief_freq;
    cj["state_freq"] = c.state_freq;
    claims.push_back(std::move(cj));
  }
  j["claims"] = std::move(claims);
  return j;
}

inline std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace prtlplan
