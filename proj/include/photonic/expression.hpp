#pragma once

#include <cctype>
#include <memory>
#include <string>

#include "photonic/common.hpp"

namespace photonic {

// Closed-form scalar expression in up to three macroscopic variables
// r1, r2, r3 (alias: r = r1). Supports +, -, *, /, exp, sin, cos, numeric
// literals and pi. Differentiation is symbolic, so modulation gradients are
// exact rather than finite-differenced.
class Expr {
public:
  using Ptr = std::shared_ptr<const Expr>;

  enum class Kind { Const, Var, Add, Sub, Mul, Div, Neg, Exp, Sin, Cos };

  static Ptr constant(double v) { return make(Kind::Const, v, 0, nullptr, nullptr); }
  static Ptr variable(int axis) { return make(Kind::Var, 0.0, axis, nullptr, nullptr); }
  static Ptr add(Ptr a, Ptr b) { return simplify2(Kind::Add, a, b); }
  static Ptr sub(Ptr a, Ptr b) { return simplify2(Kind::Sub, a, b); }
  static Ptr mul(Ptr a, Ptr b) { return simplify2(Kind::Mul, a, b); }
  static Ptr div(Ptr a, Ptr b) { return simplify2(Kind::Div, a, b); }
  static Ptr neg(Ptr a) { return make(Kind::Neg, 0, 0, a, nullptr); }
  static Ptr exp(Ptr a) { return make(Kind::Exp, 0, 0, a, nullptr); }
  static Ptr sin(Ptr a) { return make(Kind::Sin, 0, 0, a, nullptr); }
  static Ptr cos(Ptr a) { return make(Kind::Cos, 0, 0, a, nullptr); }

  double eval(const RVec& r) const {
    switch (kind_) {
      case Kind::Const: return value_;
      case Kind::Var: return axis_ < r.size() ? r[axis_] : 0.0;
      case Kind::Add: return a_->eval(r) + b_->eval(r);
      case Kind::Sub: return a_->eval(r) - b_->eval(r);
      case Kind::Mul: return a_->eval(r) * b_->eval(r);
      case Kind::Div: return a_->eval(r) / b_->eval(r);
      case Kind::Neg: return -a_->eval(r);
      case Kind::Exp: return std::exp(a_->eval(r));
      case Kind::Sin: return std::sin(a_->eval(r));
      case Kind::Cos: return std::cos(a_->eval(r));
    }
    return 0.0;
  }

  Ptr derivative(int axis) const {
    switch (kind_) {
      case Kind::Const: return constant(0.0);
      case Kind::Var: return constant(axis_ == axis ? 1.0 : 0.0);
      case Kind::Add: return add(a_->derivative(axis), b_->derivative(axis));
      case Kind::Sub: return sub(a_->derivative(axis), b_->derivative(axis));
      case Kind::Mul:
        return add(mul(a_->derivative(axis), b_), mul(a_, b_->derivative(axis)));
      case Kind::Div:
        return div(sub(mul(a_->derivative(axis), b_), mul(a_, b_->derivative(axis))),
                   mul(b_, b_));
      case Kind::Neg: return neg(a_->derivative(axis));
      case Kind::Exp: return mul(exp(a_), a_->derivative(axis));
      case Kind::Sin: return mul(cos(a_), a_->derivative(axis));
      case Kind::Cos: return neg(mul(sin(a_), a_->derivative(axis)));
    }
    return constant(0.0);
  }

private:
  static Ptr make(Kind k, double v, int axis, Ptr a, Ptr b) {
    auto e = std::make_shared<Expr>();
    e->kind_ = k;
    e->value_ = v;
    e->axis_ = axis;
    e->a_ = std::move(a);
    e->b_ = std::move(b);
    return e;
  }

  static Ptr simplify2(Kind k, Ptr a, Ptr b) {
    if (a->kind_ == Kind::Const && b->kind_ == Kind::Const) {
      RVec dummy(0);
      Ptr e = make(k, 0, 0, a, b);
      return constant(e->eval(dummy));
    }
    if (k == Kind::Mul) {
      if (a->is_const(0.0) || b->is_const(0.0)) return constant(0.0);
      if (a->is_const(1.0)) return b;
      if (b->is_const(1.0)) return a;
    }
    if (k == Kind::Add) {
      if (a->is_const(0.0)) return b;
      if (b->is_const(0.0)) return a;
    }
    if (k == Kind::Sub && b->is_const(0.0)) return a;
    return make(k, 0, 0, a, b);
  }

  bool is_const(double v) const { return kind_ == Kind::Const && value_ == v; }

public:
  Expr() = default;

private:
  Kind kind_ = Kind::Const;
  double value_ = 0.0;
  int axis_ = 0;
  Ptr a_, b_;
};

// Recursive-descent parser for the expression grammar above.
class ExprParser {
public:
  static Expr::Ptr parse(const std::string& text) {
    ExprParser p(text);
    Expr::Ptr e = p.parse_sum();
    p.skip_ws();
    if (p.pos_ != p.s_.size())
      throw ConfigError("trailing characters in expression: '" + text + "'");
    return e;
  }

private:
  explicit ExprParser(std::string s) : s_(std::move(s)) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr::Ptr parse_sum() {
    Expr::Ptr e = parse_term();
    while (true) {
      if (consume('+')) e = Expr::add(e, parse_term());
      else if (consume('-')) e = Expr::sub(e, parse_term());
      else return e;
    }
  }

  Expr::Ptr parse_term() {
    Expr::Ptr e = parse_factor();
    while (true) {
      if (consume('*')) e = Expr::mul(e, parse_factor());
      else if (consume('/')) e = Expr::div(e, parse_factor());
      else return e;
    }
  }

  Expr::Ptr parse_factor() {
    skip_ws();
    if (consume('-')) return Expr::neg(parse_factor());
    if (consume('(')) {
      Expr::Ptr e = parse_sum();
      if (!consume(')')) throw ConfigError("missing ')' in expression");
      return e;
    }
    if (pos_ >= s_.size()) throw ConfigError("unexpected end of expression");
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    throw ConfigError(std::string("unexpected character '") + c + "' in expression");
  }

  Expr::Ptr parse_number() {
    size_t end = pos_;
    while (end < s_.size() &&
           (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
            s_[end] == 'e' || s_[end] == 'E' ||
            ((s_[end] == '+' || s_[end] == '-') && end > pos_ &&
             (s_[end - 1] == 'e' || s_[end - 1] == 'E'))))
      ++end;
    double v = std::stod(s_.substr(pos_, end - pos_));
    pos_ = end;
    return Expr::constant(v);
  }

  Expr::Ptr parse_ident() {
    size_t end = pos_;
    while (end < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
      ++end;
    std::string name = s_.substr(pos_, end - pos_);
    pos_ = end;
    if (name == "pi") return Expr::constant(pi);
    if (name == "r" || name == "r1" || name == "x") return Expr::variable(0);
    if (name == "r2" || name == "y") return Expr::variable(1);
    if (name == "r3" || name == "z") return Expr::variable(2);
    if (name == "exp") return Expr::exp(parse_paren());
    if (name == "sin") return Expr::sin(parse_paren());
    if (name == "cos") return Expr::cos(parse_paren());
    throw ConfigError("unknown identifier '" + name + "' in expression");
  }

  Expr::Ptr parse_paren() {
    if (!consume('(')) throw ConfigError("expected '(' after function name");
    Expr::Ptr e = parse_sum();
    if (!consume(')')) throw ConfigError("missing ')' in expression");
    return e;
  }

  std::string s_;
  size_t pos_ = 0;
};

}  // namespace photonic
