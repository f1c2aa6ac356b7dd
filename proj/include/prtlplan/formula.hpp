#pragma once

#include <charconv>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gaussian.hpp"
#include "linalg.hpp"

namespace prtlplan {

// Chance-constrained linear predicate: P(b - c'x >= 0) > 1 - eps over a Gaussian
// belief; `negated` mirrors the test to P(c'x - b >= 0) > 1 - eps.
struct Predicate {
  Vec c;
  double b = 0.0;
  double eps = 0.0;
  bool negated = false;
  double q = 0.0;  // cached normal_quantile(1 - eps)

  Predicate() = default;
  Predicate(Vec c_, double b_, double eps_, bool negated_ = false)
      : c(std::move(c_)), b(b_), eps(eps_), negated(negated_) {
    if (!(eps > 0.0 && eps < 0.5))
      throw std::invalid_argument("Predicate: eps must lie in (0, 0.5)");
    if (c.size() == 0 || c.isZero(0.0))
      throw std::invalid_argument("Predicate: c must be a nonzero vector");
    q = normal_quantile(1.0 - eps);
  }

  Vec eff_c() const { return negated ? Vec(-c) : c; }
  double eff_b() const { return negated ? -b : b; }
  Predicate negation() const { return Predicate(c, b, eps, !negated); }
};

inline bool pred_equal(const Predicate& a, const Predicate& b) {
  if (a.c.size() != b.c.size() || a.b != b.b || a.eps != b.eps || a.negated != b.negated)
    return false;
  for (Eigen::Index i = 0; i < a.c.size(); ++i)
    if (a.c[i] != b.c[i]) return false;
  return true;
}

// Effective right-hand side: the predicate holds iff eff_c'mu < chance_margin.
// Raw overload so boundary parameters outside the Predicate invariant stay testable.
inline double chance_margin(const Vec& c, double b, double eps, bool negated, const Mat& cov) {
  if (cov.rows() != c.size() || cov.cols() != c.size())
    throw std::invalid_argument("chance_margin: dimension mismatch");
  if (!is_symmetric(cov) || min_eigenvalue(cov) < -1e-9)
    throw std::invalid_argument("chance_margin: covariance must be symmetric PSD");
  double var = c.dot(cov * c);
  double sigma = std::sqrt(std::max(0.0, var));
  double eb = negated ? -b : b;
  return eb - normal_quantile(1.0 - eps) * sigma;
}

inline double chance_margin(const Predicate& p, const Mat& cov) {
  if (cov.rows() != p.c.size() || cov.cols() != p.c.size())
    throw std::invalid_argument("chance_margin: dimension mismatch");
  if (!is_symmetric(cov) || min_eigenvalue(cov) < -1e-9)
    throw std::invalid_argument("chance_margin: covariance must be symmetric PSD");
  double sigma = std::sqrt(std::max(0.0, p.c.dot(cov * p.c)));
  return p.eff_b() - p.q * sigma;
}

inline bool pred_holds(const Predicate& p, const Vec& mu, const Mat& cov) {
  if (mu.size() != p.c.size())
    throw std::invalid_argument("pred_holds: dimension mismatch");
  return p.eff_c().dot(mu) < chance_margin(p, cov);
}

enum class Kind { True, False, Atom, ApRef, And, Or, Until, Release };

struct Node;
using FormulaPtr = std::shared_ptr<const Node>;

// Immutable AST node. F/G enter desugared: F f = true U f, G f = false R f.
struct Node {
  Kind kind;
  Predicate pred;    // Atom only
  int ap_index = -1; // ApRef only
  FormulaPtr lhs, rhs;
};

inline FormulaPtr mk_true() { return std::make_shared<Node>(Node{Kind::True}); }
inline FormulaPtr mk_false() { return std::make_shared<Node>(Node{Kind::False}); }
inline FormulaPtr mk_atom(Predicate p) {
  return std::make_shared<Node>(Node{Kind::Atom, std::move(p)});
}
inline FormulaPtr mk_ap(int index) {
  return std::make_shared<Node>(Node{Kind::ApRef, {}, index});
}
inline FormulaPtr mk_binary(Kind k, FormulaPtr a, FormulaPtr b) {
  return std::make_shared<Node>(Node{k, {}, -1, std::move(a), std::move(b)});
}
inline FormulaPtr mk_and(FormulaPtr a, FormulaPtr b) {
  return mk_binary(Kind::And, std::move(a), std::move(b));
}
inline FormulaPtr mk_or(FormulaPtr a, FormulaPtr b) {
  return mk_binary(Kind::Or, std::move(a), std::move(b));
}
inline FormulaPtr mk_until(FormulaPtr a, FormulaPtr b) {
  return mk_binary(Kind::Until, std::move(a), std::move(b));
}
inline FormulaPtr mk_release(FormulaPtr a, FormulaPtr b) {
  return mk_binary(Kind::Release, std::move(a), std::move(b));
}
inline FormulaPtr mk_eventually(FormulaPtr f) { return mk_until(mk_true(), std::move(f)); }
inline FormulaPtr mk_always(FormulaPtr f) { return mk_release(mk_false(), std::move(f)); }

inline bool formula_equal(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case Kind::True:
    case Kind::False: return true;
    case Kind::Atom: return pred_equal(a->pred, b->pred);
    case Kind::ApRef: return a->ap_index == b->ap_index;
    default:
      return formula_equal(a->lhs, b->lhs) && formula_equal(a->rhs, b->rhs);
  }
}

inline bool is_temporal_free(const FormulaPtr& f) {
  switch (f->kind) {
    case Kind::Until:
    case Kind::Release: return false;
    case Kind::And:
    case Kind::Or: return is_temporal_free(f->lhs) && is_temporal_free(f->rhs);
    default: return true;
  }
}

inline bool contains_atom(const FormulaPtr& f) {
  switch (f->kind) {
    case Kind::Atom: return true;
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
    case Kind::Release: return contains_atom(f->lhs) || contains_atom(f->rhs);
    default: return false;
  }
}

// Evaluate a temporal-free formula at a Gaussian belief.
inline bool holds_at(const FormulaPtr& f, const Vec& mu, const Mat& cov) {
  switch (f->kind) {
    case Kind::True: return true;
    case Kind::False: return false;
    case Kind::Atom: return pred_holds(f->pred, mu, cov);
    case Kind::And: return holds_at(f->lhs, mu, cov) && holds_at(f->rhs, mu, cov);
    case Kind::Or: return holds_at(f->lhs, mu, cov) || holds_at(f->rhs, mu, cov);
    default: throw std::logic_error("holds_at: formula is not temporal-free");
  }
}

namespace detail {

inline void format_real(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace detail

// Precedence: Release 0, Until 1, Or 2, And 3, unary/atom 4. Text reparses to
// an identical AST; Until(true, f) and Release(false, f) print as F/G sugar.
inline std::string pretty_print(const FormulaPtr& f, int min_level = 0) {
  std::string out;
  auto wrap = [&](int level, const std::string& body) {
    return level < min_level ? "(" + body + ")" : body;
  };
  switch (f->kind) {
    case Kind::True: return "true";
    case Kind::False: return "false";
    case Kind::ApRef: return "AP" + std::to_string(f->ap_index + 1);
    case Kind::Atom: {
      const Predicate& p = f->pred;
      if (p.negated) out += "!";
      out += "p[";
      detail::format_real(out, p.eps);
      out += "](";
      for (Eigen::Index i = 0; i < p.c.size(); ++i) {
        double coef = p.c[i];
        if (i == 0) {
          if (std::signbit(coef)) out += "-";
        } else {
          out += std::signbit(coef) ? " - " : " + ";
        }
        detail::format_real(out, std::abs(coef));
        out += "*x" + std::to_string(i + 1);
      }
      out += " <= ";
      detail::format_real(out, p.b);
      out += ")";
      return out;
    }
    case Kind::Until:
      if (f->lhs->kind == Kind::True) return wrap(4, "F " + pretty_print(f->rhs, 4));
      return wrap(1, pretty_print(f->lhs, 2) + " U " + pretty_print(f->rhs, 1));
    case Kind::Release:
      if (f->lhs->kind == Kind::False) return wrap(4, "G " + pretty_print(f->rhs, 4));
      return wrap(0, pretty_print(f->lhs, 1) + " R " + pretty_print(f->rhs, 0));
    case Kind::And:
      return wrap(3, pretty_print(f->lhs, 3) + " & " + pretty_print(f->rhs, 4));
    case Kind::Or:
      return wrap(2, pretty_print(f->lhs, 2) + " | " + pretty_print(f->rhs, 3));
  }
  throw std::logic_error("pretty_print: bad node kind");
}

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(const std::string& what, int line_, int col_)
      : std::runtime_error("parse error at " + std::to_string(line_) + ":" +
                           std::to_string(col_) + ": " + what),
        line(line_), col(col_) {}
};

namespace detail {

struct Token {
  enum Type { Ident, Number, LBracket, RBracket, LParen, RParen, Amp, Pipe, Bang,
              Plus, Minus, Star, Le, Ge, End } type;
  std::string text;
  int line = 1, col = 1;
};

inline std::vector<Token> lex(const std::string& text) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto push = [&](Token::Type t, std::string s) { out.push_back({t, std::move(s), line, col}); };
  while (i < text.size()) {
    char ch = text[i];
    if (ch == '\n') { ++line; col = 1; ++i; continue; }
    if (ch == ' ' || ch == '\t' || ch == '\r') { ++col; ++i; continue; }
    int start_col = col;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      out.push_back({Token::Ident, text.substr(i, j - i), line, start_col});
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      std::size_t j = i;
      while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) ||
                                 text[j] == '.' || text[j] == 'e' || text[j] == 'E' ||
                                 ((text[j] == '+' || text[j] == '-') && j > i &&
                                  (text[j - 1] == 'e' || text[j - 1] == 'E'))))
        ++j;
      out.push_back({Token::Number, text.substr(i, j - i), line, start_col});
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (ch == '<' || ch == '>') {
      if (i + 1 >= text.size() || text[i + 1] != '=')
        throw ParseError(std::string("stray '") + ch + "'", line, col);
      push(ch == '<' ? Token::Le : Token::Ge, text.substr(i, 2));
      col += 2;
      i += 2;
      continue;
    }
    Token::Type t;
    switch (ch) {
      case '[': t = Token::LBracket; break;
      case ']': t = Token::RBracket; break;
      case '(': t = Token::LParen; break;
      case ')': t = Token::RParen; break;
      case '&': t = Token::Amp; break;
      case '|': t = Token::Pipe; break;
      case '!': t = Token::Bang; break;
      case '+': t = Token::Plus; break;
      case '-': t = Token::Minus; break;
      case '*': t = Token::Star; break;
      default: throw ParseError(std::string("unexpected character '") + ch + "'", line, col);
    }
    push(t, text.substr(i, 1));
    ++col;
    ++i;
  }
  out.push_back({Token::End, "", line, col});
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, const std::map<std::string, Predicate>& named)
      : toks_(std::move(toks)), named_(named) {}

  FormulaPtr parse() {
    FormulaPtr f = parse_release();
    expect(Token::End, "end of input");
    return f;
  }

 private:
  std::vector<Token> toks_;
  const std::map<std::string, Predicate>& named_;
  std::size_t pos_ = 0;

  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }
  bool peek_keyword(const char* kw) const {
    return peek().type == Token::Ident && peek().text == kw;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, peek().line, peek().col);
  }
  void expect(Token::Type t, const char* what) {
    if (peek().type != t) fail(std::string("expected ") + what);
    ++pos_;
  }

  FormulaPtr parse_release() {
    std::vector<FormulaPtr> ops{parse_until()};
    while (peek_keyword("R")) {
      take();
      ops.push_back(parse_until());
    }
    FormulaPtr f = ops.back();
    for (std::size_t i = ops.size() - 1; i-- > 0;) f = mk_release(ops[i], f);
    return f;
  }

  FormulaPtr parse_until() {
    std::vector<FormulaPtr> ops{parse_disj()};
    while (peek_keyword("U")) {
      take();
      ops.push_back(parse_disj());
    }
    FormulaPtr f = ops.back();
    for (std::size_t i = ops.size() - 1; i-- > 0;) f = mk_until(ops[i], f);
    return f;
  }

  FormulaPtr parse_disj() {
    FormulaPtr f = parse_conj();
    while (peek().type == Token::Pipe) {
      take();
      f = mk_or(f, parse_conj());
    }
    return f;
  }

  FormulaPtr parse_conj() {
    FormulaPtr f = parse_unary();
    while (peek().type == Token::Amp) {
      take();
      f = mk_and(f, parse_unary());
    }
    return f;
  }

  FormulaPtr parse_unary() {
    if (peek_keyword("G")) { take(); return mk_always(parse_unary()); }
    if (peek_keyword("F")) { take(); return mk_eventually(parse_unary()); }
    if (peek().type == Token::LParen) {
      take();
      FormulaPtr f = parse_release();
      expect(Token::RParen, "')'");
      return f;
    }
    return parse_atom();
  }

  FormulaPtr parse_atom() {
    bool neg = false;
    if (peek().type == Token::Bang) { take(); neg = true; }
    if (peek().type != Token::Ident) fail("expected an atom");
    Token head = peek();
    if (head.text == "true" || head.text == "false") {
      if (neg) fail("negation applies to atoms only");
      take();
      return head.text == "true" ? mk_true() : mk_false();
    }
    if (head.text == "p" && toks_[pos_ + 1].type == Token::LBracket)
      return parse_inline_pred(neg);
    take();
    auto it = named_.find(head.text);
    if (it == named_.end())
      throw ParseError("unknown atom '" + head.text + "'", head.line, head.col);
    Predicate p = it->second;
    if (neg) p = p.negation();
    return mk_atom(std::move(p));
  }

  double parse_real() {
    bool neg = false;
    if (peek().type == Token::Minus) { take(); neg = true; }
    if (peek().type != Token::Number) fail("expected a number");
    Token t = take();
    double v = 0.0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
      throw ParseError("malformed number '" + t.text + "'", t.line, t.col);
    return neg ? -v : v;
  }

  int parse_var() {
    if (peek().type != Token::Ident || peek().text.size() < 2 || peek().text[0] != 'x')
      fail("expected a state variable like x1");
    Token t = take();
    int idx = 0;
    auto res = std::from_chars(t.text.data() + 1, t.text.data() + t.text.size(), idx);
    if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size() || idx < 1)
      throw ParseError("state indices are 1-based: '" + t.text + "'", t.line, t.col);
    return idx - 1;
  }

  FormulaPtr parse_inline_pred(bool neg) {
    Token head = take();  // 'p'
    expect(Token::LBracket, "'['");
    double eps = parse_real();
    expect(Token::RBracket, "']'");
    expect(Token::LParen, "'('");
    std::vector<std::pair<int, double>> terms;
    double sign = 1.0;
    if (peek().type == Token::Minus) { take(); sign = -1.0; }
    terms.push_back(parse_term(sign));
    while (peek().type == Token::Plus || peek().type == Token::Minus) {
      sign = take().type == Token::Minus ? -1.0 : 1.0;
      terms.push_back(parse_term(sign));
    }
    bool flip;
    if (peek().type == Token::Le) flip = false;
    else if (peek().type == Token::Ge) flip = true;
    else fail("expected '<=' or '>='");
    take();
    double b = parse_real();
    expect(Token::RParen, "')'");
    int n = 0;
    for (const auto& term : terms) n = std::max(n, term.first + 1);
    Vec c = Vec::Zero(n);
    for (const auto& term : terms) c[term.first] += term.second;
    if (flip) { c = -c; b = -b; }
    try {
      return mk_atom(Predicate(std::move(c), b, eps, neg));
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), head.line, head.col);
    }
  }

  std::pair<int, double> parse_term(double sign) {
    if (peek().type == Token::Number) {
      double coef = parse_real();
      expect(Token::Star, "'*'");
      return {parse_var(), sign * coef};
    }
    return {parse_var(), sign};
  }
};

}  // namespace detail

inline FormulaPtr parse_formula(const std::string& text,
                                const std::map<std::string, Predicate>& named = {}) {
  return detail::Parser(detail::lex(text), named).parse();
}

// AP list of maximal temporal-free subformulas (each holding >= 1 predicate;
// bare constants stay in the skeleton) plus the skeleton over ApRef leaves.
struct AbstractedFormula {
  std::vector<FormulaPtr> ap_list;
  FormulaPtr skeleton;
};

namespace detail {

inline FormulaPtr abstract_walk(const FormulaPtr& f, std::vector<FormulaPtr>& aps) {
  if (is_temporal_free(f) && contains_atom(f)) {
    for (std::size_t i = 0; i < aps.size(); ++i)
      if (formula_equal(aps[i], f)) return mk_ap(static_cast<int>(i));
    aps.push_back(f);
    return mk_ap(static_cast<int>(aps.size()) - 1);
  }
  switch (f->kind) {
    case Kind::True:
    case Kind::False: return f;
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
    case Kind::Release: {
      FormulaPtr l = abstract_walk(f->lhs, aps);  // left first: AP numbering is reading order
      FormulaPtr r = abstract_walk(f->rhs, aps);
      return mk_binary(f->kind, std::move(l), std::move(r));
    }
    default: throw std::logic_error("extract_subformulas: unexpected node");
  }
}

}  // namespace detail

inline AbstractedFormula extract_subformulas(const FormulaPtr& f) {
  AbstractedFormula out;
  out.skeleton = detail::abstract_walk(f, out.ap_list);
  return out;
}

// Substitute AP bodies back into a skeleton (inverse of extract_subformulas).
inline FormulaPtr substitute_aps(const FormulaPtr& skeleton,
                                 const std::vector<FormulaPtr>& aps) {
  switch (skeleton->kind) {
    case Kind::ApRef: return aps.at(static_cast<std::size_t>(skeleton->ap_index));
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
    case Kind::Release:
      return mk_binary(skeleton->kind, substitute_aps(skeleton->lhs, aps),
                       substitute_aps(skeleton->rhs, aps));
    default: return skeleton;
  }
}

}  // namespace prtlplan
