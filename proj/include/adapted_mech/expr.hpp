#pragma once

// Arithmetic expressions over bundle coordinates.
//
// Grammar (lowest to highest precedence):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | coordinate | parameter | func '(' expr ')' | '(' expr ')'
//
// Coordinates are x1..xn and y1..yn. Every other identifier must be a declared
// parameter, except the function names sin, cos, exp, log, sqrt.
//
// Evaluation propagates second-order jets (value, gradient, hessian) in the
// natural coordinate order x^1..x^n, y^1..y^n.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "point.hpp"

namespace adapted_mech {

using ParameterSet = std::set<std::string, std::less<>>;
using ParameterTable = std::map<std::string, double, std::less<>>;

/// Syntax or name-resolution failure while parsing expression text.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& message, std::size_t position)
      : std::runtime_error("position " + std::to_string(position) + ": " + message),
        message_(message),
        position_(position) {}

  std::size_t position() const { return position_; }
  const std::string& message() const { return message_; }

private:
  std::string message_;
  std::size_t position_;
};

/// Evaluation left the domain of an elementary function (log of a non-positive
/// value, division by zero, ...). Carries the offending subexpression text.
class DomainError : public std::runtime_error {
public:
  DomainError(const std::string& what, std::string subexpression)
      : std::runtime_error(what + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}

  const std::string& subexpression() const { return subexpression_; }

private:
  std::string subexpression_;
};

/// Unbound parameter or point of the wrong dimension.
class EvaluationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class CoordKind : std::uint8_t { x, y };
enum class UnaryOp : std::uint8_t { neg, sin, cos, exp, log, sqrt };
enum class BinaryOp : std::uint8_t { add, sub, mul, div, pow };

inline std::string_view unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::neg: return "-";
    case UnaryOp::sin: return "sin";
    case UnaryOp::cos: return "cos";
    case UnaryOp::exp: return "exp";
    case UnaryOp::log: return "log";
    case UnaryOp::sqrt: return "sqrt";
  }
  return "?";
}

inline char binary_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return '+';
    case BinaryOp::sub: return '-';
    case BinaryOp::mul: return '*';
    case BinaryOp::div: return '/';
    case BinaryOp::pow: return '^';
  }
  return '?';
}

struct Node;

/// Immutable expression AST; copies share structure.
class Expression {
public:
  Expression() = delete;
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  /// Constants are finite and non-negative; a negative value becomes neg(|v|)
  /// so that printing and parsing stay structurally inverse.
  static Expression constant(double value);
  static Expression coordinate(CoordKind kind, int index);
  static Expression x(int index) { return coordinate(CoordKind::x, index); }
  static Expression y(int index) { return coordinate(CoordKind::y, index); }
  static Expression parameter(std::string name);
  static Expression unary(UnaryOp op, Expression arg);
  static Expression binary(BinaryOp op, Expression lhs, Expression rhs);

  const Node& node() const { return *node_; }

  bool operator==(const Expression& other) const;

  /// Precedence-minimal text that parses back to the same AST.
  std::string to_string() const;

private:
  std::shared_ptr<const Node> node_;
};

namespace node {
struct Constant {
  double value;
};
struct Coordinate {
  CoordKind kind;
  int index;  // 1-based
};
struct Parameter {
  std::string name;
};
struct Unary {
  UnaryOp op;
  Expression arg;
};
struct Binary {
  BinaryOp op;
  Expression lhs;
  Expression rhs;
};
}  // namespace node

struct Node {
  std::variant<node::Constant, node::Coordinate, node::Parameter, node::Unary, node::Binary> data;
  bool depends_on_coordinates = false;
  int max_x_index = 0;
  int max_y_index = 0;
};

inline Expression Expression::constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("expression constant must be finite");
  if (std::signbit(value) && value != 0.0) return unary(UnaryOp::neg, constant(-value));
  return Expression(std::make_shared<const Node>(Node{node::Constant{value == 0.0 ? 0.0 : value}}));
}

inline Expression Expression::coordinate(CoordKind kind, int index) {
  if (index < 1) throw std::invalid_argument("coordinate index must be >= 1");
  Node n{node::Coordinate{kind, index}, true};
  (kind == CoordKind::x ? n.max_x_index : n.max_y_index) = index;
  return Expression(std::make_shared<const Node>(std::move(n)));
}

inline Expression Expression::parameter(std::string name) {
  return Expression(std::make_shared<const Node>(Node{node::Parameter{std::move(name)}}));
}

inline Expression Expression::unary(UnaryOp op, Expression arg) {
  const Node& a = arg.node();
  Node n{node::Unary{op, arg}, a.depends_on_coordinates, a.max_x_index, a.max_y_index};
  return Expression(std::make_shared<const Node>(std::move(n)));
}

inline Expression Expression::binary(BinaryOp op, Expression lhs, Expression rhs) {
  const Node& l = lhs.node();
  const Node& r = rhs.node();
  Node n{node::Binary{op, lhs, rhs}, l.depends_on_coordinates || r.depends_on_coordinates,
         std::max(l.max_x_index, r.max_x_index), std::max(l.max_y_index, r.max_y_index)};
  return Expression(std::make_shared<const Node>(std::move(n)));
}

inline bool Expression::operator==(const Expression& other) const {
  if (node_ == other.node_) return true;
  const auto& a = node_->data;
  const auto& b = other.node_->data;
  if (a.index() != b.index()) return false;
  return std::visit(
      [&](const auto& lhs) -> bool {
        using T = std::decay_t<decltype(lhs)>;
        const auto& rhs = std::get<T>(b);
        if constexpr (std::is_same_v<T, node::Constant>) {
          return lhs.value == rhs.value;
        } else if constexpr (std::is_same_v<T, node::Coordinate>) {
          return lhs.kind == rhs.kind && lhs.index == rhs.index;
        } else if constexpr (std::is_same_v<T, node::Parameter>) {
          return lhs.name == rhs.name;
        } else if constexpr (std::is_same_v<T, node::Unary>) {
          return lhs.op == rhs.op && lhs.arg == rhs.arg;
        } else {
          return lhs.op == rhs.op && lhs.lhs == rhs.lhs && lhs.rhs == rhs.rhs;
        }
      },
      a);
}

inline Expression operator+(Expression a, Expression b) { return Expression::binary(BinaryOp::add, a, b); }
inline Expression operator-(Expression a, Expression b) { return Expression::binary(BinaryOp::sub, a, b); }
inline Expression operator*(Expression a, Expression b) { return Expression::binary(BinaryOp::mul, a, b); }
inline Expression operator/(Expression a, Expression b) { return Expression::binary(BinaryOp::div, a, b); }
inline Expression operator-(Expression a) { return Expression::unary(UnaryOp::neg, a); }
inline Expression pow(Expression a, Expression b) { return Expression::binary(BinaryOp::pow, a, b); }
inline Expression sin(Expression a) { return Expression::unary(UnaryOp::sin, a); }
inline Expression cos(Expression a) { return Expression::unary(UnaryOp::cos, a); }
inline Expression exp(Expression a) { return Expression::unary(UnaryOp::exp, a); }
inline Expression log(Expression a) { return Expression::unary(UnaryOp::log, a); }
inline Expression sqrt(Expression a) { return Expression::unary(UnaryOp::sqrt, a); }

/// Names of all parameters referenced by e.
inline ParameterSet referenced_parameters(const Expression& e) {
  ParameterSet out;
  auto walk = [&](auto&& self, const Expression& ex) -> void {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, node::Parameter>) {
            out.insert(n.name);
          } else if constexpr (std::is_same_v<T, node::Unary>) {
            self(self, n.arg);
          } else if constexpr (std::is_same_v<T, node::Binary>) {
            self(self, n.lhs);
            self(self, n.rhs);
          }
        },
        ex.node().data);
  };
  walk(walk, e);
  return out;
}

inline bool references_fiber(const Expression& e) { return e.node().max_y_index > 0; }

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence(const Expression& e) {
  return std::visit(
      [](const auto& n) -> int {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, node::Unary>) {
          return n.op == UnaryOp::neg ? 3 : 5;
        } else if constexpr (std::is_same_v<T, node::Binary>) {
          switch (n.op) {
            case BinaryOp::add:
            case BinaryOp::sub: return 1;
            case BinaryOp::mul:
            case BinaryOp::div: return 2;
            case BinaryOp::pow: return 4;
          }
          return 0;
        } else {
          return 5;
        }
      },
      e.node().data);
}

inline std::string format_real(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

inline void print_into(std::string& out, const Expression& e);

inline void print_operand(std::string& out, const Expression& e, int min_precedence) {
  if (precedence(e) < min_precedence) {
    out += '(';
    print_into(out, e);
    out += ')';
  } else {
    print_into(out, e);
  }
}

inline void print_into(std::string& out, const Expression& e) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, node::Constant>) {
          out += format_real(n.value);
        } else if constexpr (std::is_same_v<T, node::Coordinate>) {
          out += (n.kind == CoordKind::x ? 'x' : 'y');
          out += std::to_string(n.index);
        } else if constexpr (std::is_same_v<T, node::Parameter>) {
          out += n.name;
        } else if constexpr (std::is_same_v<T, node::Unary>) {
          if (n.op == UnaryOp::neg) {
            out += '-';
            print_operand(out, n.arg, 3);
          } else {
            out += unary_name(n.op);
            out += '(';
            print_into(out, n.arg);
            out += ')';
          }
        } else {
          switch (n.op) {
            case BinaryOp::add:
            case BinaryOp::sub:
              print_operand(out, n.lhs, 1);
              out += n.op == BinaryOp::add ? " + " : " - ";
              print_operand(out, n.rhs, 2);
              break;
            case BinaryOp::mul:
            case BinaryOp::div:
              print_operand(out, n.lhs, 2);
              out += binary_symbol(n.op);
              print_operand(out, n.rhs, 3);
              break;
            case BinaryOp::pow:
              print_operand(out, n.lhs, 5);
              out += '^';
              print_operand(out, n.rhs, 3);
              break;
          }
        }
      },
      e.node().data);
}

}  // namespace detail

inline std::string Expression::to_string() const {
  std::string out;
  detail::print_into(out, *this);
  return out;
}

inline std::string print(const Expression& e) { return e.to_string(); }

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
public:
  Parser(std::string_view text, int dim, const ParameterSet& params) : text_(text), dim_(dim), params_(params) {}

  Expression parse() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    Expression e = parse_expr();
    skip_space();
    if (pos_ < text_.size()) throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
    return e;
  }

private:
  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expression parse_expr() {
    Expression lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + parse_term();
      } else if (accept('-')) {
        lhs = lhs - parse_term();
      } else {
        return lhs;
      }
    }
  }

  Expression parse_term() {
    Expression lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * parse_unary();
      } else if (accept('/')) {
        lhs = lhs / parse_unary();
      } else {
        return lhs;
      }
    }
  }

  Expression parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expression parse_power() {
    Expression base = parse_primary();
    if (accept('^')) return pow(base, parse_unary());
    return base;
  }

  Expression parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression inner = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  Expression parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        digits();
      } else {
        pos_ = mark;  // 'e' belongs to whatever follows; rejected there
      }
    }
    double value = 0.0;
    auto token = text_.substr(start, pos_ - start);
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw ParseError("malformed number '" + std::string(token) + "'", start);
    }
    if (!std::isfinite(value)) throw ParseError("number out of range '" + std::string(token) + "'", start);
    return Expression::constant(value);
  }

  Expression parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    const std::string name(text_.substr(start, pos_ - start));

    static const std::map<std::string, UnaryOp, std::less<>> functions = {
        {"sin", UnaryOp::sin}, {"cos", UnaryOp::cos}, {"exp", UnaryOp::exp},
        {"log", UnaryOp::log}, {"sqrt", UnaryOp::sqrt}};
    if (auto it = functions.find(name); it != functions.end()) {
      if (!accept('(')) throw ParseError("expected '(' after function '" + name + "'", pos_);
      Expression arg = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return Expression::unary(it->second, arg);
    }

    if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'y') &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      long index = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
      if (ec != std::errc() || index < 1 || index > dim_) {
        throw ParseError("coordinate index out of range: " + name + " (dimension " + std::to_string(dim_) + ")", start);
      }
      return Expression::coordinate(name[0] == 'x' ? CoordKind::x : CoordKind::y, static_cast<int>(index));
    }

    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') throw ParseError("unknown function " + name, start);
    if (!params_.contains(name)) throw ParseError("unknown identifier " + name, start);
    return Expression::parameter(name);
  }

  std::string_view text_;
  int dim_;
  const ParameterSet& params_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses infix text for a system of dimension n.
inline Expression parse(std::string_view text, int n, const ParameterSet& params = {}) {
  if (n < 1) throw std::invalid_argument("expression dimension must be >= 1");
  return detail::Parser(text, n, params).parse();
}

// ---------------------------------------------------------------------------
// Second-order jets

/// Value, natural gradient and hessian of a scalar at a bundle point.
struct Jet2 {
  double value = 0.0;
  Eigen::VectorXd gradient;  // length 2n: d/dx^1..d/dx^n, d/dy^1..d/dy^n
  Eigen::MatrixXd hessian;   // 2n x 2n, symmetric

  static Jet2 constant(double v, int size) {
    return Jet2{v, Eigen::VectorXd::Zero(size), Eigen::MatrixXd::Zero(size, size)};
  }
};

namespace detail {

inline Jet2 jet_add(const Jet2& a, const Jet2& b, double sign) {
  return Jet2{a.value + sign * b.value, a.gradient + sign * b.gradient, a.hessian + sign * b.hessian};
}

inline Jet2 jet_mul(const Jet2& a, const Jet2& b) {
  const Eigen::MatrixXd outer = a.gradient * b.gradient.transpose();
  return Jet2{a.value * b.value, b.value * a.gradient + a.value * b.gradient,
              b.value * a.hessian + a.value * b.hessian + outer + outer.transpose()};
}

/// Chain rule for f(u) with f' = d1, f'' = d2.
inline Jet2 jet_compose(const Jet2& u, double value, double d1, double d2) {
  return Jet2{value, d1 * u.gradient, d1 * u.hessian + d2 * (u.gradient * u.gradient.transpose())};
}

template <class T>
T integer_power(const T& base, long long k, T one, auto&& mul) {
  T result = std::move(one);
  T factor = base;
  bool first = true;
  while (k > 0) {
    if (k & 1) {
      result = first ? factor : mul(result, factor);
      first = false;
    }
    k >>= 1;
    if (k > 0) factor = mul(factor, factor);
  }
  return result;
}

/// Integer exponents of coordinate-free exponent expressions are unrolled.
inline std::optional<long long> integral_exponent(const Expression& exponent, double value) {
  if (exponent.node().depends_on_coordinates) return std::nullopt;
  if (value != std::nearbyint(value) || std::abs(value) > 1e9) return std::nullopt;
  return static_cast<long long>(value);
}

inline int coordinate_slot(const node::Coordinate& c, int n) {
  return c.kind == CoordKind::x ? c.index - 1 : n + c.index - 1;
}

inline double lookup(const ParameterTable& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw EvaluationError("unbound parameter '" + name + "'");
  return it->second;
}

inline void check_dimension(const Expression& e, int n) {
  const Node& nd = e.node();
  if (nd.max_x_index > n || nd.max_y_index > n) {
    throw EvaluationError("expression references coordinates beyond dimension " + std::to_string(n));
  }
}

class JetEvaluator {
public:
  JetEvaluator(const BundlePoint& p, const ParameterTable& params) : p_(p), params_(params), size_(2 * p.dim()) {}

  Jet2 operator()(const Expression& e) const {
    return std::visit([&](const auto& n) { return eval(e, n); }, e.node().data);
  }

private:
  Jet2 eval(const Expression&, const node::Constant& c) const { return Jet2::constant(c.value, size_); }

  Jet2 eval(const Expression&, const node::Coordinate& c) const {
    const int slot = coordinate_slot(c, p_.dim());
    Jet2 j = Jet2::constant(p_.natural()(slot), size_);
    j.gradient(slot) = 1.0;
    return j;
  }

  Jet2 eval(const Expression&, const node::Parameter& prm) const {
    return Jet2::constant(lookup(params_, prm.name), size_);
  }

  Jet2 eval(const Expression& self, const node::Unary& u) const {
    Jet2 a = (*this)(u.arg);
    const double v = a.value;
    switch (u.op) {
      case UnaryOp::neg: return Jet2{-v, -a.gradient, -a.hessian};
      case UnaryOp::sin: return jet_compose(a, std::sin(v), std::cos(v), -std::sin(v));
      case UnaryOp::cos: return jet_compose(a, std::cos(v), -std::sin(v), -std::cos(v));
      case UnaryOp::exp: {
        const double ev = std::exp(v);
        if (!std::isfinite(ev)) throw DomainError("exp overflow", self.to_string());
        return jet_compose(a, ev, ev, ev);
      }
      case UnaryOp::log:
        if (!(v > 0.0)) throw DomainError("log of non-positive value " + format_real(v), self.to_string());
        return jet_compose(a, std::log(v), 1.0 / v, -1.0 / (v * v));
      case UnaryOp::sqrt: {
        if (v < 0.0) throw DomainError("sqrt of negative value " + format_real(v), self.to_string());
        if (v == 0.0) throw DomainError("sqrt is not differentiable at 0", self.to_string());
        const double s = std::sqrt(v);
        return jet_compose(a, s, 0.5 / s, -0.25 / (s * v));
      }
    }
    throw std::logic_error("unhandled unary op");
  }

  Jet2 reciprocal(const Jet2& b, const Expression& where) const {
    if (b.value == 0.0) throw DomainError("division by zero", where.to_string());
    const double inv = 1.0 / b.value;
    return jet_compose(b, inv, -inv * inv, 2.0 * inv * inv * inv);
  }

  Jet2 eval(const Expression& self, const node::Binary& b) const {
    Jet2 l = (*this)(b.lhs);
    Jet2 r = (*this)(b.rhs);
    switch (b.op) {
      case BinaryOp::add: return jet_add(l, r, 1.0);
      case BinaryOp::sub: return jet_add(l, r, -1.0);
      case BinaryOp::mul: return jet_mul(l, r);
      case BinaryOp::div: return jet_mul(l, reciprocal(r, self));
      case BinaryOp::pow: {
        if (auto k = integral_exponent(b.rhs, r.value)) {
          if (*k == 0) return Jet2::constant(1.0, size_);
          Jet2 positive = integer_power(l, std::abs(*k), Jet2::constant(1.0, size_),
                                        [](const Jet2& a, const Jet2& c) { return jet_mul(a, c); });
          return *k > 0 ? positive : reciprocal(positive, self);
        }
        if (!(l.value > 0.0)) {
          throw DomainError("non-integer power of non-positive base " + format_real(l.value), self.to_string());
        }
        // a^b = exp(b log a)
        Jet2 log_base = jet_compose(l, std::log(l.value), 1.0 / l.value, -1.0 / (l.value * l.value));
        Jet2 product = jet_mul(r, log_base);
        const double ev = std::exp(product.value);
        if (!std::isfinite(ev)) throw DomainError("power overflow", self.to_string());
        return jet_compose(product, ev, ev, ev);
      }
    }
    throw std::logic_error("unhandled binary op");
  }

  const BundlePoint& p_;
  const ParameterTable& params_;
  int size_;
};

class ValueEvaluator {
public:
  ValueEvaluator(const BundlePoint& p, const ParameterTable& params) : p_(p), params_(params) {}

  double operator()(const Expression& e) const {
    return std::visit([&](const auto& n) { return eval(e, n); }, e.node().data);
  }

private:
  double eval(const Expression&, const node::Constant& c) const { return c.value; }
  double eval(const Expression&, const node::Coordinate& c) const {
    return p_.natural()(coordinate_slot(c, p_.dim()));
  }
  double eval(const Expression&, const node::Parameter& prm) const { return lookup(params_, prm.name); }

  double eval(const Expression& self, const node::Unary& u) const {
    const double v = (*this)(u.arg);
    switch (u.op) {
      case UnaryOp::neg: return -v;
      case UnaryOp::sin: return std::sin(v);
      case UnaryOp::cos: return std::cos(v);
      case UnaryOp::exp: {
        const double ev = std::exp(v);
        if (!std::isfinite(ev)) throw DomainError("exp overflow", self.to_string());
        return ev;
      }
      case UnaryOp::log:
        if (!(v > 0.0)) throw DomainError("log of non-positive value " + format_real(v), self.to_string());
        return std::log(v);
      case UnaryOp::sqrt:
        if (v < 0.0) throw DomainError("sqrt of negative value " + format_real(v), self.to_string());
        return std::sqrt(v);
    }
    throw std::logic_error("unhandled unary op");
  }

  double eval(const Expression& self, const node::Binary& b) const {
    const double l = (*this)(b.lhs);
    const double r = (*this)(b.rhs);
    switch (b.op) {
      case BinaryOp::add: return l + r;
      case BinaryOp::sub: return l - r;
      case BinaryOp::mul: return l * r;
      case BinaryOp::div:
        if (r == 0.0) throw DomainError("division by zero", self.to_string());
        return l / r;
      case BinaryOp::pow: {
        if (auto k = integral_exponent(b.rhs, r)) {
          if (*k == 0) return 1.0;
          double positive = integer_power(l, std::abs(*k), 1.0, [](double a, double c) { return a * c; });
          if (*k > 0) return positive;
          if (positive == 0.0) throw DomainError("division by zero", self.to_string());
          return 1.0 / positive;
        }
        if (!(l > 0.0)) {
          throw DomainError("non-integer power of non-positive base " + format_real(l), self.to_string());
        }
        const double ev = std::exp(r * std::log(l));
        if (!std::isfinite(ev)) throw DomainError("power overflow", self.to_string());
        return ev;
      }
    }
    throw std::logic_error("unhandled binary op");
  }

  const BundlePoint& p_;
  const ParameterTable& params_;
};

}  // namespace detail

/// Value, gradient and hessian of e at p by forward propagation of
/// second-order jets. No finite differencing.
inline Jet2 eval_jet(const Expression& e, const BundlePoint& p, const ParameterTable& params = {}) {
  detail::check_dimension(e, p.dim());
  Jet2 j = detail::JetEvaluator(p, params)(e);
  // Packet and scalar code paths may round (i,j) and (j,i) differently.
  j.hessian.triangularView<Eigen::StrictlyLower>() = j.hessian.transpose();
  return j;
}

/// Plain value of e at p.
inline double eval_value(const Expression& e, const BundlePoint& p, const ParameterTable& params = {}) {
  detail::check_dimension(e, p.dim());
  return detail::ValueEvaluator(p, params)(e);
}

}  // namespace adapted_mech
