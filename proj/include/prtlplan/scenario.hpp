#pragma once

// Problem-instance ingestion: a Scenario bundles the plant, the initial belief,
// the workspace, the atomic predicates, the formula text, and the search budget.
// Loading validates every field and names the offending field on failure.

#include <cctype>
#include <complex>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>

#include <json.hpp>

#include "prtlplan/belief.hpp"
#include "prtlplan/fsearch.hpp"
#include "prtlplan/formula.hpp"
#include "prtlplan/linalg.hpp"
#include "prtlplan/polytope.hpp"

namespace prtlplan {

using Json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

struct Scenario {
  std::string name;
  LinearSystem system;
  BeliefState init;
  Vec box_lo, box_hi;
  Mat cov_max;
  std::map<std::string, Predicate> atoms;
  std::string formula_text;
  FormulaPtr formula;
  SearchParams search;
  int k_max = 8;
  int n_iters = 500;
  unsigned long seed = 1;

  Polytope workspace() const { return box_polytope(box_lo, box_hi); }
};

namespace detail {

[[noreturn]] inline void scenario_fail(const std::string& field, const std::string& constraint) {
  throw std::invalid_argument("scenario: " + field + ": " + constraint);
}

inline const Json& require_field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) scenario_fail(path.empty() ? key : path, "must be an object");
  const auto it = j.find(key);
  if (it == j.end()) scenario_fail(path.empty() ? key : path + "." + key, "missing required field");
  return *it;
}

inline std::string field_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline double json_number(const Json& j, const std::string& path) {
  if (!j.is_number()) scenario_fail(path, "must be a number");
  return j.get<double>();
}

inline long json_integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) scenario_fail(path, "must be an integer");
  return j.get<long>();
}

inline std::string json_string(const Json& j, const std::string& path) {
  if (!j.is_string()) scenario_fail(path, "must be a string");
  return j.get<std::string>();
}

inline Vec json_vec(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) scenario_fail(path, "must be a nonempty array of numbers");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v[Eigen::Index(i)] = json_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

inline Mat json_mat(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) scenario_fail(path, "must be a nonempty array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  Mat m;
  for (std::size_t r = 0; r < rows; ++r) {
    const Vec row = json_vec(j[r], path + "[" + std::to_string(r) + "]");
    if (r == 0) {
      cols = std::size_t(row.size());
      m.resize(Eigen::Index(rows), Eigen::Index(cols));
    } else if (std::size_t(row.size()) != cols) {
      scenario_fail(path, "rows must all have the same length");
    }
    m.row(Eigen::Index(r)) = row.transpose();
  }
  return m;
}

inline double json_number_or(const Json& obj, const std::string& key, const std::string& path,
                             double fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : json_number(*it, field_path(path, key));
}

inline long json_integer_or(const Json& obj, const std::string& key, const std::string& path,
                            long fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : json_integer(*it, field_path(path, key));
}

inline void check_psd(const Mat& m, const std::string& path) {
  if (m.rows() != m.cols()) scenario_fail(path, "must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    scenario_fail(path, "must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
  if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
    scenario_fail(path, "must be positive semidefinite");
}

// PBH test: (A, B) is stabilisable iff [A - lambda I, B] has full row rank at
// every eigenvalue with |lambda| >= 1.
inline bool stabilisable(const Mat& a, const Mat& b) {
  const Eigen::Index n = a.rows();
  Eigen::ComplexEigenSolver<Mat> es(a);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()[i];
    if (std::abs(lambda) < 1.0 - 1e-9) continue;
    Eigen::MatrixXcd pbh(n, n + b.cols());
    pbh.leftCols(n) = a.cast<std::complex<double>>() -
                      lambda * Eigen::MatrixXcd::Identity(n, n);
    pbh.rightCols(b.cols()) = b.cast<std::complex<double>>();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(pbh);
    qr.setThreshold(1e-9);
    if (qr.rank() < n) return false;
  }
  return true;
}

inline NoiseModel noise_from_json(const Json& j, Eigen::Index n, Eigen::Index p) {
  const std::string kind = json_string(require_field(j, "kind", "system.noise"),
                                       "system.noise.kind");
  if (kind == "constant") {
    const Vec v = json_vec(require_field(j, "variances", "system.noise"),
                           "system.noise.variances");
    if (v.size() != p) scenario_fail("system.noise.variances", "size must equal C's row count");
    try {
      return NoiseModel::make_constant(v);
    } catch (const std::invalid_argument& e) {
      scenario_fail("system.noise", e.what());
    }
  }
  if (kind == "min_const_poly") {
    const double s_const = json_number(require_field(j, "sigma2_const", "system.noise"),
                                       "system.noise.sigma2_const");
    const double s_min = json_number(require_field(j, "sigma2_min", "system.noise"),
                                     "system.noise.sigma2_min");
    const Json& poly = require_field(j, "poly", "system.noise");
    if (!poly.is_array() || Eigen::Index(poly.size()) != p)
      scenario_fail("system.noise.poly", "must be an array with one term list per output");
    std::vector<std::vector<PolyTerm>> terms;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const std::string path = "system.noise.poly[" + std::to_string(i) + "]";
      if (!poly[i].is_array()) scenario_fail(path, "must be an array of terms");
      std::vector<PolyTerm> row;
      for (std::size_t t = 0; t < poly[i].size(); ++t) {
        const Json& term = poly[i][t];
        const std::string tp = path + "[" + std::to_string(t) + "]";
        PolyTerm pt;
        pt.coef = json_number(require_field(term, "coef", tp), tp + ".coef");
        pt.state_index = int(json_integer(require_field(term, "state", tp), tp + ".state"));
        pt.shift = json_number_or(term, "shift", tp, 0.0);
        pt.power = int(json_integer(require_field(term, "power", tp), tp + ".power"));
        row.push_back(pt);
      }
      terms.push_back(std::move(row));
    }
    try {
      return NoiseModel::make_min_const_poly(s_const, s_min, std::move(terms), int(n));
    } catch (const std::invalid_argument& e) {
      scenario_fail("system.noise", e.what());
    }
  }
  scenario_fail("system.noise.kind", "must be \"constant\" or \"min_const_poly\"");
}

inline bool valid_atom_name(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  static const std::set<std::string> reserved{"F", "G", "U", "R", "X", "p", "true", "false"};
  return reserved.count(s) == 0;
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j) {
  using detail::field_path;
  using detail::json_integer;
  using detail::json_integer_or;
  using detail::json_mat;
  using detail::json_number;
  using detail::json_number_or;
  using detail::json_string;
  using detail::json_vec;
  using detail::require_field;
  using detail::scenario_fail;

  if (!j.is_object()) scenario_fail("root", "must be a JSON object");
  if (json_integer(require_field(j, "format_version", ""), "format_version") != kFormatVersion)
    scenario_fail("format_version", "must be " + std::to_string(kFormatVersion));

  Scenario sc;
  sc.name = json_string(require_field(j, "name", ""), "name");

  const Json& sysj = require_field(j, "system", "");
  sc.system.A = json_mat(require_field(sysj, "A", "system"), "system.A");
  const Eigen::Index n = sc.system.A.rows();
  if (sc.system.A.cols() != n) scenario_fail("system.A", "must be square");
  sc.system.B = json_mat(require_field(sysj, "B", "system"), "system.B");
  if (sc.system.B.rows() != n) scenario_fail("system.B", "row count must match A");
  const Eigen::Index m = sc.system.B.cols();
  sc.system.C = json_mat(require_field(sysj, "C", "system"), "system.C");
  if (sc.system.C.cols() != n) scenario_fail("system.C", "column count must match A");
  const Eigen::Index p = sc.system.C.rows();
  sc.system.W = json_mat(require_field(sysj, "W", "system"), "system.W");
  if (sc.system.W.rows() != n || sc.system.W.cols() != n)
    scenario_fail("system.W", "must be n x n");
  detail::check_psd(sc.system.W, "system.W");
  sc.system.noise = detail::noise_from_json(require_field(sysj, "noise", "system"), n, p);
  sc.system.Hu = json_mat(require_field(sysj, "Hu", "system"), "system.Hu");
  if (sc.system.Hu.cols() != m) scenario_fail("system.Hu", "column count must match B");
  sc.system.cu = json_vec(require_field(sysj, "cu", "system"), "system.cu");
  if (sc.system.cu.size() != sc.system.Hu.rows())
    scenario_fail("system.cu", "size must match Hu's row count");
  if (!lp::feasible(-sc.system.Hu, -sc.system.cu))
    scenario_fail("system.Hu", "input set {u : Hu u >= cu} is empty");
  if (!detail::stabilisable(sc.system.A, sc.system.B))
    scenario_fail("system", "(A, B) fails the PBH stabilisability test");

  const Json& initj = require_field(j, "initial_belief", "");
  const Vec mu0 = json_vec(require_field(initj, "mean", "initial_belief"), "initial_belief.mean");
  if (mu0.size() != n) scenario_fail("initial_belief.mean", "size must match the state dimension");
  const Mat sigma0 = json_mat(require_field(initj, "cov", "initial_belief"), "initial_belief.cov");
  if (sigma0.rows() != n || sigma0.cols() != n)
    scenario_fail("initial_belief.cov", "must be n x n");
  detail::check_psd(sigma0, "initial_belief.cov");
  sc.init = make_belief(mu0, symmetrize(sigma0));

  sc.cov_max = json_mat(require_field(j, "cov_max", ""), "cov_max");
  if (sc.cov_max.rows() != n || sc.cov_max.cols() != n) scenario_fail("cov_max", "must be n x n");
  detail::check_psd(sc.cov_max, "cov_max");
  if (!psd_leq(sc.init.cov, sc.cov_max, 1e-9))
    scenario_fail("initial_belief.cov", "must satisfy cov <= cov_max");

  const Json& wsj = require_field(j, "workspace", "");
  sc.box_lo = json_vec(require_field(wsj, "lo", "workspace"), "workspace.lo");
  sc.box_hi = json_vec(require_field(wsj, "hi", "workspace"), "workspace.hi");
  if (sc.box_lo.size() != n || sc.box_hi.size() != n)
    scenario_fail("workspace", "lo and hi must match the state dimension");
  if (!((sc.box_lo.array() < sc.box_hi.array()).all()))
    scenario_fail("workspace", "lo must be strictly below hi in every coordinate");
  if (!((sc.init.mean.array() >= sc.box_lo.array()).all() &&
        (sc.init.mean.array() <= sc.box_hi.array()).all()))
    scenario_fail("workspace", "must contain initial_belief.mean");

  const Json& atomsj = require_field(j, "atoms", "");
  if (!atomsj.is_object()) scenario_fail("atoms", "must be an object of named predicates");
  for (auto it = atomsj.begin(); it != atomsj.end(); ++it) {
    const std::string path = "atoms." + it.key();
    if (!detail::valid_atom_name(it.key()))
      scenario_fail(path, "atom names must be identifiers and not reserved words");
    const Vec c = json_vec(require_field(*it, "c", path), path + ".c");
    if (c.size() != n) scenario_fail(path + ".c", "size must match the state dimension");
    const double b = json_number(require_field(*it, "b", path), path + ".b");
    const double eps = json_number(require_field(*it, "eps", path), path + ".eps");
    try {
      sc.atoms.emplace(it.key(), Predicate(c, b, eps));
    } catch (const std::invalid_argument& e) {
      scenario_fail(path, e.what());
    }
  }

  sc.formula_text = json_string(require_field(j, "formula", ""), "formula");
  try {
    sc.formula = parse_formula(sc.formula_text, sc.atoms);
  } catch (const std::exception& e) {
    scenario_fail("formula", e.what());
  }

  const auto sit = j.find("search");
  const Json empty = Json::object();
  const Json& searchj = sit == j.end() ? empty : *sit;
  if (!searchj.is_object()) scenario_fail("search", "must be an object");
  SearchParams& sp = sc.search;
  sp.w_sigma = json_number_or(searchj, "w_sigma", "search", sp.w_sigma);
  sp.delta_near = json_number_or(searchj, "delta_near", "search", sp.delta_near);
  sp.delta_drain = json_number_or(searchj, "delta_drain", "search", sp.delta_drain);
  sp.t_min = int(json_integer_or(searchj, "t_min", "search", sp.t_min));
  sp.t_max = int(json_integer_or(searchj, "t_max", "search", sp.t_max));
  sp.q_mean = json_number_or(searchj, "q_mean", "search", sp.q_mean);
  sp.q_cov = json_number_or(searchj, "q_cov", "search", sp.q_cov);
  sp.r_ctrl = json_number_or(searchj, "r_ctrl", "search", sp.r_ctrl);
  sp.qf_mean = json_number_or(searchj, "qf_mean", "search", sp.qf_mean);
  sp.qf_cov = json_number_or(searchj, "qf_cov", "search", sp.qf_cov);
  sp.tol_loop = json_number_or(searchj, "tol_loop", "search", sp.tol_loop);
  sp.tol_psd = json_number_or(searchj, "tol_psd", "search", sp.tol_psd);
  if (!(sp.w_sigma >= 0.0)) scenario_fail("search.w_sigma", "must be >= 0");
  if (!(sp.delta_near > 0.0)) scenario_fail("search.delta_near", "must be > 0");
  if (!(sp.delta_drain > 0.0)) scenario_fail("search.delta_drain", "must be > 0");
  if (sp.t_min < 1) scenario_fail("search.t_min", "must be >= 1");
  if (sp.t_max < sp.t_min) scenario_fail("search.t_max", "must be >= t_min");
  if (!(sp.q_mean > 0.0)) scenario_fail("search.q_mean", "must be > 0");
  if (!(sp.q_cov > 0.0)) scenario_fail("search.q_cov", "must be > 0");
  if (!(sp.r_ctrl > 0.0)) scenario_fail("search.r_ctrl", "must be > 0");
  if (!(sp.qf_mean >= 0.0)) scenario_fail("search.qf_mean", "must be >= 0");
  if (!(sp.qf_cov >= 0.0)) scenario_fail("search.qf_cov", "must be >= 0");
  if (!(sp.tol_loop > 0.0)) scenario_fail("search.tol_loop", "must be > 0");
  if (!(sp.tol_psd >= 0.0)) scenario_fail("search.tol_psd", "must be >= 0");
  sc.k_max = int(json_integer_or(searchj, "k_max", "search", sc.k_max));
  if (sc.k_max < 0) scenario_fail("search.k_max", "must be >= 0");
  sc.n_iters = int(json_integer_or(searchj, "n_iters", "search", sc.n_iters));
  if (sc.n_iters < 1) scenario_fail("search.n_iters", "must be >= 1");

  const long seed = json_integer_or(j, "seed", "", long(sc.seed));
  if (seed < 0) scenario_fail("seed", "must be >= 0");
  sc.seed = static_cast<unsigned long>(seed);
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scenario: cannot open file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("scenario: " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace prtlplan
