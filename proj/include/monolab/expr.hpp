#pragma once

// Reaction-term expression language.
//
//   field   := expr { ';' expr } [ ';' ]
//   expr    := term { ('+' | '-') term }
//   term    := unary { ('*' | '/') unary }
//   unary   := '-' unary | power
//   power   := primary [ '^' unary ]            (right associative)
//   primary := number | 'u' digits | func '(' expr ')' | '(' expr ')'
//   func    := tanh | exp | sin | cos | sqrt | abs
//
// Expressions are compiled to a postfix program and evaluated either on
// doubles or on forward-mode dual numbers, which gives exact Jacobians.

#include <Eigen/Core>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace monolab {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : std::runtime_error(message + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// A component evaluated to NaN/inf, or a derivative does not exist.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& message, std::size_t component)
      : std::runtime_error(message), component_(component) {}
  /// Zero-based component index.
  std::size_t component() const { return component_; }

 private:
  std::size_t component_;
};

enum class Function { Tanh, Exp, Sin, Cos, Sqrt, Abs };

inline const char* function_name(Function f) {
  switch (f) {
    case Function::Tanh: return "tanh";
    case Function::Exp: return "exp";
    case Function::Sin: return "sin";
    case Function::Cos: return "cos";
    case Function::Sqrt: return "sqrt";
    case Function::Abs: return "abs";
  }
  return "?";
}

inline std::optional<Function> function_from_name(std::string_view name) {
  if (name == "tanh") return Function::Tanh;
  if (name == "exp") return Function::Exp;
  if (name == "sin") return Function::Sin;
  if (name == "cos") return Function::Cos;
  if (name == "sqrt") return Function::Sqrt;
  if (name == "abs") return Function::Abs;
  return std::nullopt;
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };

  Kind kind = Kind::Number;
  double value = 0.0;      // Number
  int variable = 0;        // Variable, 1-based
  Function function = Function::Tanh;
  std::vector<ExprPtr> args;

  static ExprPtr number(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Number;
    e->value = v;
    return e;
  }
  static ExprPtr var(int index) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Variable;
    e->variable = index;
    return e;
  }
  static ExprPtr unary(Kind kind, ExprPtr a) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->args = {std::move(a)};
    return e;
  }
  static ExprPtr binary(Kind kind, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->args = {std::move(a), std::move(b)};
    return e;
  }
  static ExprPtr call(Function f, ExprPtr a) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Call;
    e->function = f;
    e->args = {std::move(a)};
    return e;
  }
};

inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case Expr::Kind::Number:
      if (a.value != b.value) return false;
      break;
    case Expr::Kind::Variable:
      if (a.variable != b.variable) return false;
      break;
    case Expr::Kind::Call:
      if (a.function != b.function) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!structurally_equal(*a.args[i], *b.args[i])) return false;
  }
  return true;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Fully parenthesized rendering; reparses to a structurally identical tree.
inline std::string to_string(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Number: return format_number(e.value);
    case Expr::Kind::Variable: return "u" + std::to_string(e.variable);
    case Expr::Kind::Negate: return "(-" + to_string(*e.args[0]) + ")";
    case Expr::Kind::Call:
      return std::string(function_name(e.function)) + "(" + to_string(*e.args[0]) + ")";
    default: break;
  }
  const char* op = "+";
  switch (e.kind) {
    case Expr::Kind::Sub: op = " - "; break;
    case Expr::Kind::Mul: op = " * "; break;
    case Expr::Kind::Div: op = " / "; break;
    case Expr::Kind::Pow: op = " ^ "; break;
    default: op = " + "; break;
  }
  return "(" + to_string(*e.args[0]) + op + to_string(*e.args[1]) + ")";
}

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, int arity) : src_(src), arity_(arity) {}

  std::vector<ExprPtr> field() {
    std::vector<ExprPtr> out;
    skip_ws();
    if (at_end()) throw ParseError("empty reaction source", pos_);
    out.push_back(expr());
    skip_ws();
    while (peek() == ';') {
      ++pos_;
      skip_ws();
      if (at_end()) break;  // trailing separator
      out.push_back(expr());
      skip_ws();
    }
    if (!at_end()) throw ParseError(std::string("unexpected character '") + peek() + "'", pos_);
    return out;
  }

  ExprPtr single() {
    skip_ws();
    ExprPtr e = expr();
    skip_ws();
    if (!at_end()) throw ParseError(std::string("unexpected character '") + peek() + "'", pos_);
    return e;
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return at_end() ? '\0' : src_[pos_]; }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  ExprPtr expr() {
    ExprPtr lhs = term();
    for (;;) {
      skip_ws();
      const char c = peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      ExprPtr rhs = term();
      lhs = Expr::binary(c == '+' ? Expr::Kind::Add : Expr::Kind::Sub, lhs, rhs);
    }
  }

  ExprPtr term() {
    ExprPtr lhs = unary();
    for (;;) {
      skip_ws();
      const char c = peek();
      if (c != '*' && c != '/') return lhs;
      ++pos_;
      ExprPtr rhs = unary();
      lhs = Expr::binary(c == '*' ? Expr::Kind::Mul : Expr::Kind::Div, lhs, rhs);
    }
  }

  ExprPtr unary() {
    skip_ws();
    if (peek() == '-') {
      ++pos_;
      return Expr::unary(Expr::Kind::Negate, unary());
    }
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    skip_ws();
    if (peek() == '^') {
      ++pos_;
      return Expr::binary(Expr::Kind::Pow, base, unary());
    }
    return base;
  }

  ExprPtr primary() {
    skip_ws();
    const std::size_t start = pos_;
    const char c = peek();
    if (at_end()) throw ParseError("unexpected end of input", pos_);
    if (c == '(') {
      ++pos_;
      ExprPtr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string name;
      while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
        name += src_[pos_++];
      }
      skip_ws();
      if (peek() == '(') {
        auto fn = function_from_name(name);
        if (!fn) throw ParseError("unknown function '" + name + "'", start);
        ++pos_;
        ExprPtr arg = expr();
        expect(')');
        return Expr::call(*fn, arg);
      }
      if (name.size() > 1 && name[0] == 'u' &&
          name.find_first_not_of("0123456789", 1) == std::string::npos) {
        const long index = std::strtol(name.c_str() + 1, nullptr, 10);
        if (index < 1 || index > arity_) {
          throw ParseError("variable " + name + " out of range for arity " +
                               std::to_string(arity_),
                           start);
        }
        return Expr::var(static_cast<int>(index));
      }
      throw ParseError("unknown identifier '" + name + "'", start);
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  ExprPtr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    };
    digits();
    if (peek() == '.') {
      ++pos_;
      digits();
    }
    if (peek() == 'e' || peek() == 'E') {
      const std::size_t mark = pos_;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (!std::isdigit(static_cast<unsigned char>(peek()))) {
        pos_ = mark;  // not an exponent after all
      } else {
        digits();
      }
    }
    const std::string text(src_.substr(start, pos_ - start));
    if (text == ".") throw ParseError("malformed number", start);
    return Expr::number(std::strtod(text.c_str(), nullptr));
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) throw ParseError(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int arity_;
};

}  // namespace detail

inline ExprPtr parse_expression(std::string_view source, int arity) {
  return detail::Parser(source, arity).single();
}

namespace ad {

/// First-order dual number: value and one directional derivative.
struct Dual {
  double v = 0.0;
  double d = 0.0;
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}

// Chain rule with a zero tangent short-circuit: an infinite f'(a) must not
// poison directions that do not depend on `a`.
inline double chain(double fprime, double tangent) {
  return tangent == 0.0 ? 0.0 : fprime * tangent;
}

inline Dual tanh(Dual a) {
  const double t = std::tanh(a.v);
  return {t, chain(1.0 - t * t, a.d)};
}
inline Dual exp(Dual a) {
  const double e = std::exp(a.v);
  return {e, chain(e, a.d)};
}
inline Dual sin(Dual a) { return {std::sin(a.v), chain(std::cos(a.v), a.d)}; }
inline Dual cos(Dual a) { return {std::cos(a.v), chain(-std::sin(a.v), a.d)}; }
inline Dual sqrt(Dual a) {
  const double s = std::sqrt(a.v);
  return {s, chain(0.5 / s, a.d)};
}
inline Dual abs(Dual a) {
  const double sg = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
  return {std::abs(a.v), chain(sg, a.d)};
}
inline Dual pow(Dual a, Dual b) {
  const double v = std::pow(a.v, b.v);
  double d = chain(b.v * std::pow(a.v, b.v - 1.0), a.d);
  if (b.d != 0.0) d += v * std::log(a.v) * b.d;
  return {v, d};
}

}  // namespace ad

/// Postfix program compiled from one expression tree.
class Program {
 public:
  enum class Op { Push, Load, Neg, Add, Sub, Mul, Div, Pow, Call };
  struct Instr {
    Op op;
    double value = 0.0;
    int index = 0;
    Function function = Function::Tanh;
  };

  Program() = default;
  explicit Program(const Expr& e) {
    compile(e);
    std::size_t depth = 0;
    for (const Instr& in : code_) {
      switch (in.op) {
        case Op::Push:
        case Op::Load: ++depth; break;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Pow: --depth; break;
        default: break;
      }
      max_depth_ = std::max(max_depth_, depth);
    }
  }

  std::size_t max_depth() const { return max_depth_; }

  /// `stack` must hold at least max_depth() entries.
  template <class T>
  T run(std::span<const T> u, T* stack) const {
    using std::abs, std::cos, std::exp, std::pow, std::sin, std::sqrt, std::tanh;
    std::size_t top = 0;
    for (const Instr& in : code_) {
      switch (in.op) {
        case Op::Push: stack[top++] = T{in.value}; break;
        case Op::Load: stack[top++] = u[static_cast<std::size_t>(in.index)]; break;
        case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
        case Op::Add: --top; stack[top - 1] = stack[top - 1] + stack[top]; break;
        case Op::Sub: --top; stack[top - 1] = stack[top - 1] - stack[top]; break;
        case Op::Mul: --top; stack[top - 1] = stack[top - 1] * stack[top]; break;
        case Op::Div: --top; stack[top - 1] = stack[top - 1] / stack[top]; break;
        case Op::Pow: --top; stack[top - 1] = pow(stack[top - 1], stack[top]); break;
        case Op::Call: {
          T& a = stack[top - 1];
          switch (in.function) {
            case Function::Tanh: a = tanh(a); break;
            case Function::Exp: a = exp(a); break;
            case Function::Sin: a = sin(a); break;
            case Function::Cos: a = cos(a); break;
            case Function::Sqrt: a = sqrt(a); break;
            case Function::Abs: a = abs(a); break;
          }
          break;
        }
      }
    }
    return stack[0];
  }

 private:
  void compile(const Expr& e) {
    for (const ExprPtr& a : e.args) compile(*a);
    switch (e.kind) {
      case Expr::Kind::Number: code_.push_back({Op::Push, e.value}); break;
      case Expr::Kind::Variable: code_.push_back({Op::Load, 0.0, e.variable - 1}); break;
      case Expr::Kind::Negate: code_.push_back({Op::Neg}); break;
      case Expr::Kind::Add: code_.push_back({Op::Add}); break;
      case Expr::Kind::Sub: code_.push_back({Op::Sub}); break;
      case Expr::Kind::Mul: code_.push_back({Op::Mul}); break;
      case Expr::Kind::Div: code_.push_back({Op::Div}); break;
      case Expr::Kind::Pow: code_.push_back({Op::Pow}); break;
      case Expr::Kind::Call: code_.push_back({Op::Call, 0.0, 0, e.function}); break;
    }
  }

  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
};

/// The reaction term f : R^n -> R^n. Immutable once built.
class ReactionField {
 public:
  ReactionField(int arity, std::vector<ExprPtr> components)
      : arity_(arity), components_(std::move(components)) {
    if (arity_ < 1) throw std::invalid_argument("ReactionField: arity must be >= 1");
    if (components_.size() != static_cast<std::size_t>(arity_)) {
      throw std::invalid_argument("ReactionField: expected " + std::to_string(arity_) +
                                  " components, got " + std::to_string(components_.size()));
    }
    for (const ExprPtr& c : components_) {
      check_variables(*c);
      programs_.emplace_back(*c);
      stack_size_ = std::max(stack_size_, programs_.back().max_depth());
    }
  }

  /// Parses `source` (components separated by ';').
  static ReactionField parse(std::string_view source, int arity) {
    if (arity < 1) throw ParseError("arity must be >= 1", 0);
    auto comps = detail::Parser(source, arity).field();
    if (comps.size() != static_cast<std::size_t>(arity)) {
      throw ParseError("arity mismatch: expected " + std::to_string(arity) +
                           " components, found " + std::to_string(comps.size()),
                       source.size());
    }
    return ReactionField(arity, std::move(comps));
  }

  int arity() const { return arity_; }
  std::size_t size() const { return static_cast<std::size_t>(arity_); }
  const std::vector<ExprPtr>& components() const { return components_; }
  std::size_t stack_size() const { return stack_size_; }

  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < components_.size(); ++i) {
      if (i) s += "; ";
      s += monolab::to_string(*components_[i]);
    }
    return s;
  }

  /// Hot-path evaluation; `stack` needs stack_size() entries.
  void eval_into(std::span<const double> u, std::span<double> out, double* stack) const {
    for (std::size_t i = 0; i < programs_.size(); ++i) {
      const double v = programs_[i].run<double>(u, stack);
      if (!std::isfinite(v)) {
        throw EvaluationError("component " + std::to_string(i + 1) + " evaluated to " +
                                  format_number(v),
                              i);
      }
      out[i] = v;
    }
  }

  std::vector<double> eval(std::span<const double> u) const {
    check_arity(u.size());
    for (double x : u) {
      if (!std::isfinite(x)) throw EvaluationError("non-finite input", 0);
    }
    std::vector<double> out(size());
    std::vector<double> stack(stack_size_ + 1);
    eval_into(u, out, stack.data());
    return out;
  }

  std::vector<double> eval(const std::vector<double>& u) const {
    return eval(std::span<const double>(u));
  }

  /// Exact Jacobian by one forward-mode sweep per input direction.
  /// `seeds` and `stack` are scratch of length n and stack_size().
  void jacobian_into(std::span<const double> u, Eigen::Ref<Eigen::MatrixXd> jac,
                     ad::Dual* seeds, ad::Dual* stack) const {
    const std::size_t n = size();
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) seeds[k] = {u[k], k == j ? 1.0 : 0.0};
      for (std::size_t i = 0; i < n; ++i) {
        const ad::Dual r = programs_[i].run<ad::Dual>(std::span<const ad::Dual>(seeds, n), stack);
        if (!std::isfinite(r.v) || !std::isfinite(r.d)) {
          throw EvaluationError("component " + std::to_string(i + 1) +
                                    " is not differentiable at the given point",
                                i);
        }
        jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.d;
      }
    }
  }

  Eigen::MatrixXd jacobian(std::span<const double> u) const {
    check_arity(u.size());
    for (double x : u) {
      if (!std::isfinite(x)) throw EvaluationError("non-finite input", 0);
    }
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd jac(n, n);
    std::vector<ad::Dual> seeds(size());
    std::vector<ad::Dual> stack(stack_size_ + 1);
    jacobian_into(u, jac, seeds.data(), stack.data());
    return jac;
  }

  Eigen::MatrixXd jacobian(const std::vector<double>& u) const {
    return jacobian(std::span<const double>(u));
  }

 private:
  void check_arity(std::size_t n) const {
    if (n != size()) {
      throw std::invalid_argument("ReactionField: expected " + std::to_string(arity_) +
                                  " inputs, got " + std::to_string(n));
    }
  }

  void check_variables(const Expr& e) const {
    if (e.kind == Expr::Kind::Variable && (e.variable < 1 || e.variable > arity_)) {
      throw std::invalid_argument("ReactionField: variable u" + std::to_string(e.variable) +
                                  " out of range");
    }
    for (const ExprPtr& a : e.args) check_variables(*a);
  }

  int arity_;
  std::vector<ExprPtr> components_;
  std::vector<Program> programs_;
  std::size_t stack_size_ = 0;
};

}  // namespace monolab
