#pragma once

#include <cctype>
#include <string>
#include <utility>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/moyal.hpp"
#include "starforge/rational.hpp"
#include "starforge/series.hpp"
#include "starforge/weyl_functions.hpp"

namespace starforge {

// Parse tree over rationals, nu, z_i, Z_i, dz_i with + - * ^ and the calls
// star(a, b), comm(a, b), sharp(f), bar(a).
struct Expr {
  enum class Kind { number, nu, base, fiber, form, neg, add, sub, mul, pow, call };

  Kind kind = Kind::number;
  Rational value;    // number
  int index = 0;     // variable index (0-based) or exponent
  std::string name;  // call
  std::vector<Expr> args;

  static Expr number(const Rational& v) {
    Expr e;
    e.value = v;
    return e;
  }
  static Expr var(Kind k, int i = 0) {
    Expr e;
    e.kind = k;
    e.index = i;
    return e;
  }
  static Expr unary(Expr a) {
    Expr e;
    e.kind = Kind::neg;
    e.args.push_back(std::move(a));
    return e;
  }
  static Expr binary(Kind k, Expr a, Expr b) {
    Expr e;
    e.kind = k;
    e.args.push_back(std::move(a));
    e.args.push_back(std::move(b));
    return e;
  }
  static Expr power(Expr a, int k) {
    Expr e;
    e.kind = Kind::pow;
    e.index = k;
    e.args.push_back(std::move(a));
    return e;
  }
  static Expr call(std::string fn, std::vector<Expr> args) {
    Expr e;
    e.kind = Kind::call;
    e.name = std::move(fn);
    e.args = std::move(args);
    return e;
  }

  bool operator==(const Expr& o) const {
    return kind == o.kind && value == o.value && index == o.index && name == o.name && args == o.args;
  }
};

inline int call_arity(const std::string& fn) {
  if (fn == "star" || fn == "comm") return 2;
  if (fn == "sharp" || fn == "bar") return 1;
  return -1;
}

namespace detail {

class ExprParser {
 public:
  ExprParser(const std::string& src, int n) : src_(src), n_(n) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ < src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_, col_); }
  [[noreturn]] void fail_at(const std::string& msg, int line, int col) const { throw ParseError(msg, line, col); }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  // U+2212 is accepted as a minus sign.
  bool at_minus() const {
    if (pos_ < src_.size() && src_[pos_] == '-') return true;
    return src_.compare(pos_, 3, "\xE2\x88\x92") == 0;
  }
  void eat_minus() {
    if (src_[pos_] == '-') {
      advance();
      return;
    }
    pos_ += 3;
    ++col_;
  }

  bool peek(char c) {
    skip();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(pos_ < src_.size() ? "expected '" + std::string(1, c) + "'" : "unexpected end of input");
    advance();
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      skip();
      if (peek('+')) {
        advance();
        e = Expr::binary(Expr::Kind::add, std::move(e), term());
      } else if (at_minus()) {
        eat_minus();
        e = Expr::binary(Expr::Kind::sub, std::move(e), term());
      } else {
        return e;
      }
    }
  }

  Expr term() {
    Expr e = unary();
    while (peek('*')) {
      advance();
      e = Expr::binary(Expr::Kind::mul, std::move(e), unary());
    }
    return e;
  }

  Expr unary() {
    skip();
    if (at_minus()) {
      eat_minus();
      return Expr::unary(unary());
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (!peek('^')) return base;
    advance();
    skip();
    const int line = line_, col = col_;
    std::string digits = read_digits();
    if (digits.empty()) fail("exponent must be a non-negative integer");
    if (digits.size() > 4) fail_at("exponent too large", line, col);
    return Expr::power(std::move(base), std::stoi(digits));
  }

  std::string read_digits() {
    std::string s;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      s += src_[pos_];
      advance();
    }
    return s;
  }

  Expr primary() {
    skip();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const int line = line_, col = col_;
    const char c = src_[pos_];
    if (c == '(') {
      advance();
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string num = read_digits();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
        advance();
        std::string den = read_digits();
        if (den.find_first_not_of('0') == std::string::npos) fail_at("zero denominator", line, col);
        return Expr::number(parse_rational(num + "/" + den));
      }
      return Expr::number(parse_rational(num));
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");
    std::string word;
    while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) {
      word += src_[pos_];
      advance();
    }
    if (peek('(')) {
      const int arity = call_arity(word);
      if (arity < 0) fail_at("unknown function '" + word + "'", line, col);
      advance();
      std::vector<Expr> args;
      if (!peek(')')) {
        args.push_back(expr());
        while (peek(',')) {
          advance();
          args.push_back(expr());
        }
      }
      expect(')');
      if (static_cast<int>(args.size()) != arity)
        fail_at(word + " expects " + std::to_string(arity) + " argument(s), got " + std::to_string(args.size()), line,
                col);
      return Expr::call(word, std::move(args));
    }
    std::string digits = read_digits();
    if (word == "nu" && digits.empty()) return Expr::var(Expr::Kind::nu);
    Expr::Kind kind;
    if (word == "z")
      kind = Expr::Kind::base;
    else if (word == "Z")
      kind = Expr::Kind::fiber;
    else if (word == "dz")
      kind = Expr::Kind::form;
    else
      fail_at("unknown variable '" + word + digits + "'", line, col);
    if (digits.empty() || digits.size() > 2) fail_at("unknown variable '" + word + digits + "'", line, col);
    const int i = std::stoi(digits);
    if (i < 1 || i > 2 * n_) fail_at("unknown variable '" + word + digits + "' for n = " + std::to_string(n_), line, col);
    return Expr::var(kind, i - 1);
  }

  const std::string& src_;
  int n_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

inline int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::add:
    case Expr::Kind::sub: return 1;
    case Expr::Kind::mul: return 2;
    case Expr::Kind::neg: return 3;
    case Expr::Kind::pow: return 4;
    default: return 5;
  }
}

inline std::string print_at(const Expr& e, int min_prec);

inline std::string print_bare(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::number: return e.value.get_str();
    case Expr::Kind::nu: return "nu";
    case Expr::Kind::base: return "z" + std::to_string(e.index + 1);
    case Expr::Kind::fiber: return "Z" + std::to_string(e.index + 1);
    case Expr::Kind::form: return "dz" + std::to_string(e.index + 1);
    case Expr::Kind::neg: return "-" + print_at(e.args[0], 3);
    case Expr::Kind::add: return print_at(e.args[0], 1) + " + " + print_at(e.args[1], 2);
    case Expr::Kind::sub: return print_at(e.args[0], 1) + " - " + print_at(e.args[1], 2);
    case Expr::Kind::mul: return print_at(e.args[0], 2) + " * " + print_at(e.args[1], 3);
    case Expr::Kind::pow: return print_at(e.args[0], 5) + "^" + std::to_string(e.index);
    case Expr::Kind::call: {
      std::string s = e.name + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) s += (i ? ", " : "") + print_at(e.args[i], 1);
      return s + ")";
    }
  }
  return "";
}

inline std::string print_at(const Expr& e, int min_prec) {
  // A negative literal only arises programmatically; parenthesized it reads back as negation.
  if (e.kind == Expr::Kind::number && sgn(e.value) < 0) return "(" + e.value.get_str() + ")";
  std::string s = print_bare(e);
  return precedence(e) < min_prec ? "(" + s + ")" : s;
}

}  // namespace detail

inline Expr parse_expression(const std::string& src, int n) {
  if (n < 1) throw DomainError("n must be at least 1");
  return detail::ExprParser(src, n).parse();
}

inline std::string print_expression(const Expr& e) { return detail::print_at(e, 0); }

// Values the tree in the truncated algebra; * is the commutative pointwise product.
inline WeylSeries evaluate(const Expr& e, const SymplecticFrame& frame, int N) {
  const int n = frame.dim_n();
  auto arg = [&](std::size_t i) { return evaluate(e.args[i], frame, N); };
  switch (e.kind) {
    case Expr::Kind::number: return WeylSeries::constant(n, N, e.value);
    case Expr::Kind::nu: return WeylSeries::nu(n, N);
    case Expr::Kind::base: return WeylSeries::base(n, N, e.index);
    case Expr::Kind::fiber: return WeylSeries::fiber(n, N, e.index);
    case Expr::Kind::form: return WeylSeries::form(n, N, e.index);
    case Expr::Kind::neg: return -arg(0);
    case Expr::Kind::add: return arg(0) + arg(1);
    case Expr::Kind::sub: return arg(0) - arg(1);
    case Expr::Kind::mul: return pointwise_product(arg(0), arg(1));
    case Expr::Kind::pow: return pointwise_power(arg(0), e.index);
    case Expr::Kind::call:
      if (e.name == "star") return moyal_product(arg(0), arg(1), frame);
      if (e.name == "comm") return star_commutator(arg(0), arg(1), frame);
      if (e.name == "bar") return involution(arg(0));
      if (e.name == "sharp") return weyl_continuation(arg(0), frame).with_trunc(N);
      break;
  }
  throw DomainError("cannot evaluate expression");
}

inline WeylSeries evaluate(const std::string& src, const SymplecticFrame& frame, int N) {
  return evaluate(parse_expression(src, frame.dim_n()), frame, N);
}

}  // namespace starforge
