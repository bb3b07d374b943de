#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phiopt/rational.hpp"

namespace phiopt {

struct ExprError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parse failure with a 1-based column into the offending expression string.
struct ParseError : ExprError {
  int column;
  ParseError(const std::string& msg, int col)
      : ExprError(msg + " (column " + std::to_string(col) + ")"), column(col) {}
};

// Scalar expression in the design variable t and parameters theta<k>.
// Value-semantic tree; Pow keeps an integer exponent so every expression is a
// rational function of its leaves.
class Expr {
 public:
  enum class Kind { Const, Var, Param, Add, Sub, Mul, Div, Neg, Pow };

  Kind kind = Kind::Const;
  double value = 0.0;   // Const
  int index = 0;        // Param: as written in the source text
  int exponent = 0;     // Pow
  std::vector<Expr> kids;

  bool is_const(double v) const { return kind == Kind::Const && value == v; }

  static Expr constant(double v) {
    Expr e;
    e.kind = Kind::Const;
    e.value = v;
    return e;
  }
  static Expr var() {
    Expr e;
    e.kind = Kind::Var;
    return e;
  }
  static Expr param(int idx) {
    Expr e;
    e.kind = Kind::Param;
    e.index = idx;
    return e;
  }

  // The composite factories fold constants and drop identities so that
  // derivative trees stay small.
  static Expr add(Expr a, Expr b) {
    if (a.kind == Kind::Const && b.kind == Kind::Const)
      return constant(a.value + b.value);
    if (a.is_const(0.0)) return b;
    if (b.is_const(0.0)) return a;
    return binary(Kind::Add, std::move(a), std::move(b));
  }
  static Expr sub(Expr a, Expr b) {
    if (a.kind == Kind::Const && b.kind == Kind::Const)
      return constant(a.value - b.value);
    if (b.is_const(0.0)) return a;
    if (a.is_const(0.0)) return neg(std::move(b));
    return binary(Kind::Sub, std::move(a), std::move(b));
  }
  static Expr mul(Expr a, Expr b) {
    if (a.kind == Kind::Const && b.kind == Kind::Const)
      return constant(a.value * b.value);
    if (a.is_const(0.0) || b.is_const(0.0)) return constant(0.0);
    if (a.is_const(1.0)) return b;
    if (b.is_const(1.0)) return a;
    return binary(Kind::Mul, std::move(a), std::move(b));
  }
  static Expr div(Expr a, Expr b) {
    if (b.is_const(0.0)) throw ExprError("division by the constant zero");
    if (a.is_const(0.0)) return constant(0.0);
    if (b.is_const(1.0)) return a;
    if (a.kind == Kind::Const && b.kind == Kind::Const)
      return constant(a.value / b.value);
    return binary(Kind::Div, std::move(a), std::move(b));
  }
  static Expr neg(Expr a) {
    if (a.kind == Kind::Const) return constant(-a.value);
    if (a.kind == Kind::Neg) return a.kids[0];
    Expr e;
    e.kind = Kind::Neg;
    e.kids.push_back(std::move(a));
    return e;
  }
  static Expr pow(Expr a, int exponent) {
    if (exponent == 0) return constant(1.0);
    if (exponent == 1) return a;
    if (a.kind == Kind::Const) return constant(std::pow(a.value, exponent));
    Expr e;
    e.kind = Kind::Pow;
    e.exponent = exponent;
    e.kids.push_back(std::move(a));
    return e;
  }

 private:
  static Expr binary(Kind k, Expr a, Expr b) {
    Expr e;
    e.kind = k;
    e.kids.reserve(2);
    e.kids.push_back(std::move(a));
    e.kids.push_back(std::move(b));
    return e;
  }
};

inline double evaluate(const Expr& e, double t,
                       const std::vector<double>& theta = {}) {
  switch (e.kind) {
    case Expr::Kind::Const:
      return e.value;
    case Expr::Kind::Var:
      return t;
    case Expr::Kind::Param:
      if (e.index < 0 || e.index >= static_cast<int>(theta.size()))
        throw ExprError("parameter index " + std::to_string(e.index) +
                        " out of range");
      return theta[static_cast<std::size_t>(e.index)];
    case Expr::Kind::Add:
      return evaluate(e.kids[0], t, theta) + evaluate(e.kids[1], t, theta);
    case Expr::Kind::Sub:
      return evaluate(e.kids[0], t, theta) - evaluate(e.kids[1], t, theta);
    case Expr::Kind::Mul:
      return evaluate(e.kids[0], t, theta) * evaluate(e.kids[1], t, theta);
    case Expr::Kind::Div:
      return evaluate(e.kids[0], t, theta) / evaluate(e.kids[1], t, theta);
    case Expr::Kind::Neg:
      return -evaluate(e.kids[0], t, theta);
    case Expr::Kind::Pow:
      return std::pow(evaluate(e.kids[0], t, theta), e.exponent);
  }
  throw ExprError("corrupt expression node");
}

// d e / d theta_j via the usual quotient, product and chain rules.
inline Expr diff_param(const Expr& e, int j) {
  using K = Expr::Kind;
  switch (e.kind) {
    case K::Const:
    case K::Var:
      return Expr::constant(0.0);
    case K::Param:
      return Expr::constant(e.index == j ? 1.0 : 0.0);
    case K::Add:
      return Expr::add(diff_param(e.kids[0], j), diff_param(e.kids[1], j));
    case K::Sub:
      return Expr::sub(diff_param(e.kids[0], j), diff_param(e.kids[1], j));
    case K::Mul:
      return Expr::add(Expr::mul(diff_param(e.kids[0], j), e.kids[1]),
                       Expr::mul(e.kids[0], diff_param(e.kids[1], j)));
    case K::Div:
      return Expr::div(
          Expr::sub(Expr::mul(diff_param(e.kids[0], j), e.kids[1]),
                    Expr::mul(e.kids[0], diff_param(e.kids[1], j))),
          Expr::pow(e.kids[1], 2));
    case K::Neg:
      return Expr::neg(diff_param(e.kids[0], j));
    case K::Pow:
      return Expr::mul(
          Expr::mul(Expr::constant(e.exponent), Expr::pow(e.kids[0], e.exponent - 1)),
          diff_param(e.kids[0], j));
  }
  throw ExprError("corrupt expression node");
}

inline void collect_params(const Expr& e, std::set<int>& out) {
  if (e.kind == Expr::Kind::Param) out.insert(e.index);
  for (const Expr& k : e.kids) collect_params(k, out);
}

// Shifts every parameter index down by offset (1-based source spellings
// become 0-based storage indices).
inline void rebase_params(Expr& e, int offset) {
  if (e.kind == Expr::Kind::Param) e.index -= offset;
  for (Expr& k : e.kids) rebase_params(k, offset);
}

// Substitutes numeric parameter values and flattens the tree into a single
// quotient of polynomials in t.  No cancellation: numerator and denominator
// are built purely by ring operations.
inline RationalFunction to_rational(const Expr& e,
                                    const std::vector<double>& theta = {}) {
  using K = Expr::Kind;
  switch (e.kind) {
    case K::Const:
      return RationalFunction::constant(e.value);
    case K::Var:
      return RationalFunction::from_polynomial(Polynomial({0.0, 1.0}));
    case K::Param:
      if (e.index < 0 || e.index >= static_cast<int>(theta.size()))
        throw ExprError("parameter index " + std::to_string(e.index) +
                        " out of range");
      return RationalFunction::constant(theta[static_cast<std::size_t>(e.index)]);
    case K::Add:
      return to_rational(e.kids[0], theta) + to_rational(e.kids[1], theta);
    case K::Sub:
      return to_rational(e.kids[0], theta) - to_rational(e.kids[1], theta);
    case K::Mul:
      return to_rational(e.kids[0], theta) * to_rational(e.kids[1], theta);
    case K::Div:
      return to_rational(e.kids[0], theta) / to_rational(e.kids[1], theta);
    case K::Neg:
      return -to_rational(e.kids[0], theta);
    case K::Pow: {
      RationalFunction base = to_rational(e.kids[0], theta);
      const int n = std::abs(e.exponent);
      RationalFunction acc = RationalFunction::constant(1.0);
      for (int i = 0; i < n; ++i) acc = acc * base;
      if (e.exponent >= 0) return acc;
      if (acc.num.is_zero())
        throw ExprError("negative power of the zero function");
      return RationalFunction(acc.den, acc.num);
    }
  }
  throw ExprError("corrupt expression node");
}

inline std::string to_string(const Expr& e) {
  using K = Expr::Kind;
  std::ostringstream os;
  switch (e.kind) {
    case K::Const:
      os << std::setprecision(std::numeric_limits<double>::max_digits10)
         << e.value;
      break;
    case K::Var:
      os << "t";
      break;
    case K::Param:
      os << "theta" << e.index;
      break;
    case K::Add:
      os << "(" << to_string(e.kids[0]) << " + " << to_string(e.kids[1]) << ")";
      break;
    case K::Sub:
      os << "(" << to_string(e.kids[0]) << " - " << to_string(e.kids[1]) << ")";
      break;
    case K::Mul:
      os << "(" << to_string(e.kids[0]) << " * " << to_string(e.kids[1]) << ")";
      break;
    case K::Div:
      os << "(" << to_string(e.kids[0]) << " / " << to_string(e.kids[1]) << ")";
      break;
    case K::Neg:
      os << "(-" << to_string(e.kids[0]) << ")";
      break;
    case K::Pow:
      os << to_string(e.kids[0]) << "^" << e.exponent;
      break;
  }
  return os.str();
}

namespace detail {

// Recursive-descent parser for
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | postfix
//   postfix := primary ('^' exponent)*
//   primary := NUMBER | 't' | 'theta' DIGITS | '(' expr ')'
// Exponents are integer literals, optionally parenthesized and signed.
class ExprParser {
 public:
  explicit ExprParser(const std::string& text) : text_(text) {}

  Expr parse() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ < text_.size())
      throw ParseError("unexpected trailing input", column());
    return e;
  }

 private:
  int column() const { return static_cast<int>(pos_) + 1; }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (eat('+'))
        e = Expr::add(std::move(e), parse_term());
      else if (eat('-'))
        e = Expr::sub(std::move(e), parse_term());
      else
        return e;
    }
  }

  Expr parse_term() {
    Expr e = parse_unary();
    for (;;) {
      if (eat('*'))
        e = Expr::mul(std::move(e), parse_unary());
      else if (eat('/'))
        e = Expr::div(std::move(e), parse_unary());
      else
        return e;
    }
  }

  Expr parse_unary() {
    if (eat('-')) return Expr::neg(parse_unary());
    return parse_postfix();
  }

  Expr parse_postfix() {
    Expr e = parse_primary();
    while (eat('^')) e = Expr::pow(std::move(e), parse_exponent());
    return e;
  }

  int parse_exponent() {
    skip_ws();
    const bool paren = eat('(');
    skip_ws();
    int sign = 1;
    if (eat('-')) sign = -1;
    skip_ws();
    const int start = column();
    if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
      throw ParseError("exponent must be an integer literal", start);
    long v = 0;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > 1000) throw ParseError("exponent too large", start);
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' ||
                                text_[pos_] == 'E'))
      throw ParseError("exponent must be an integer literal", start);
    if (paren && !eat(')'))
      throw ParseError("expected ')' after exponent", column());
    return sign * static_cast<int>(v);
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size())
      throw ParseError("unexpected end of expression", column());
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!eat(')')) throw ParseError("expected ')'", column());
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", column());
  }

  Expr parse_number() {
    const int start = column();
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || !std::isfinite(v))
      throw ParseError("malformed number", start);
    pos_ += static_cast<std::size_t>(end - begin);
    return Expr::constant(v);
  }

  Expr parse_ident() {
    const int start = column();
    std::size_t e = pos_;
    while (e < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[e])) || text_[e] == '_'))
      ++e;
    const std::string name = text_.substr(pos_, e - pos_);
    pos_ = e;
    if (name == "t") return Expr::var();
    if (name.rfind("theta", 0) == 0 && name.size() > 5) {
      for (std::size_t i = 5; i < name.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(name[i])))
          throw ParseError("malformed parameter name '" + name + "'", start);
      const long idx = std::strtol(name.c_str() + 5, nullptr, 10);
      if (idx > 64) throw ParseError("parameter index too large", start);
      return Expr::param(static_cast<int>(idx));
    }
    throw ParseError("unknown identifier '" + name + "'", start);
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse_expression(const std::string& text) {
  return detail::ExprParser(text).parse();
}

}  // namespace phiopt
