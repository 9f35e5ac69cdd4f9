#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/frame.hpp"
#include "starforge/matrix.hpp"
#include "starforge/rational.hpp"

namespace starforge {

// nu^l * z^base * Z^fiber * dz^{forms}; the forms bitmask is stored in increasing index order.
// Member order fixes the canonical term order: nu power, fiber, base, forms.
struct Monomial {
  int nu = 0;
  MultiIndex fiber{};
  MultiIndex base{};
  std::uint16_t forms = 0;

  int fiber_degree() const { return order(fiber); }
  int base_degree() const { return order(base); }
  int form_degree() const { return std::popcount(forms); }
  int weight() const { return 2 * nu + fiber_degree(); }

  auto operator<=>(const Monomial&) const = default;
};

// Sign of dz^{a} ^ dz^{b} once reordered into increasing index order; 0 if they overlap.
inline int wedge_sign(std::uint16_t a, std::uint16_t b) {
  if (a & b) return 0;
  int swaps = 0;
  for (int j = 0; j < 16; ++j)
    if (b & (1u << j)) swaps += std::popcount(static_cast<std::uint16_t>(a >> (j + 1)));
  return (swaps % 2) ? -1 : 1;
}

inline constexpr int kMinusInfinity = std::numeric_limits<int>::min();

// Truncated element of the Weyl algebra bundle: terms with 2l + |alpha| <= trunc_N.
class WeylSeries {
 public:
  using Terms = std::map<Monomial, Rational>;

  WeylSeries() = default;
  WeylSeries(int dim_n, int trunc_N) : n_(dim_n), N_(trunc_N) {
    if (dim_n < 1 || 2 * dim_n > kMaxVars) throw DimensionMismatch("dim_n must lie in 1..4");
    if (trunc_N < 0) throw DomainError("trunc_N must be non-negative");
  }

  static WeylSeries constant(int n, int N, const Rational& c) {
    WeylSeries s(n, N);
    s.add(Monomial{}, c);
    return s;
  }
  static WeylSeries nu(int n, int N) {
    Monomial m;
    m.nu = 1;
    return term(n, N, m, 1);
  }
  // Variable indices are 0-based here and 1-based in the text form.
  static WeylSeries fiber(int n, int N, int i) {
    Monomial m;
    m.fiber.at(static_cast<std::size_t>(i)) = 1;
    return term(n, N, m, 1);
  }
  static WeylSeries base(int n, int N, int i) {
    Monomial m;
    m.base.at(static_cast<std::size_t>(i)) = 1;
    return term(n, N, m, 1);
  }
  static WeylSeries form(int n, int N, int i) {
    Monomial m;
    m.forms = static_cast<std::uint16_t>(1u << i);
    return term(n, N, m, 1);
  }
  static WeylSeries term(int n, int N, const Monomial& m, const Rational& c) {
    WeylSeries s(n, N);
    s.add(m, c);
    return s;
  }

  int dim_n() const { return n_; }
  int vars() const { return 2 * n_; }
  int trunc() const { return N_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  Rational coeff(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  // Accumulates c * m; terms above the truncation are dropped.
  void add(const Monomial& m, const Rational& c) {
    if (c == 0 || m.weight() > N_) return;
    check_indices(m);
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  WeylSeries& operator+=(const WeylSeries& o) {
    check_compatible(o);
    for (const auto& [m, c] : o.terms_) add(m, c);
    return *this;
  }
  WeylSeries& operator-=(const WeylSeries& o) {
    check_compatible(o);
    for (const auto& [m, c] : o.terms_) add(m, -c);
    return *this;
  }
  WeylSeries& operator*=(const Rational& s) {
    if (s == 0) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }

  friend WeylSeries operator+(WeylSeries a, const WeylSeries& b) { return a += b; }
  friend WeylSeries operator-(WeylSeries a, const WeylSeries& b) { return a -= b; }
  friend WeylSeries operator*(WeylSeries a, const Rational& s) { return a *= s; }
  friend WeylSeries operator*(const Rational& s, WeylSeries a) { return a *= s; }
  WeylSeries operator-() const {
    WeylSeries r = *this;
    for (auto& [m, c] : r.terms_) c = -c;
    return r;
  }

  // Equality of the represented polynomials; the truncation label is metadata.
  bool operator==(const WeylSeries& o) const { return n_ == o.n_ && terms_ == o.terms_; }

  // Relabels the truncation, dropping terms above it.
  WeylSeries with_trunc(int N) const {
    WeylSeries r(n_, N);
    for (const auto& [m, c] : terms_)
      if (m.weight() <= N) r.terms_.emplace(m, c);
    return r;
  }

  std::string str() const;

 private:
  void check_indices(const Monomial& m) const {
    if (m.nu < 0) throw DomainError("negative power of nu");
    for (int i = vars(); i < kMaxVars; ++i)
      if (m.fiber[static_cast<std::size_t>(i)] || m.base[static_cast<std::size_t>(i)])
        throw DimensionMismatch("variable index beyond 2n");
    if (m.forms >> vars()) throw DimensionMismatch("form index beyond 2n");
  }
  void check_compatible(const WeylSeries& o) const {
    if (n_ != o.n_) throw DimensionMismatch("dim_n mismatch");
    if (N_ != o.N_) throw TruncationMismatch("trunc_N mismatch");
  }

  int n_ = 1;
  int N_ = 0;
  Terms terms_;
};

inline std::string monomial_str(const Monomial& m, const Rational& c, int vars) {
  std::string s = c.get_str();
  if (m.nu == 1) s += " * nu";
  if (m.nu > 1) s += " * nu^" + std::to_string(m.nu);
  auto emit = [&](const MultiIndex& e, const char* name) {
    for (int i = 0; i < vars; ++i) {
      int p = e[static_cast<std::size_t>(i)];
      if (p == 0) continue;
      s += std::string(" * ") + name + std::to_string(i + 1);
      if (p > 1) s += "^" + std::to_string(p);
    }
  };
  emit(m.base, "z");
  emit(m.fiber, "Z");
  for (int i = 0; i < vars; ++i)
    if (m.forms & (1u << i)) s += " * dz" + std::to_string(i + 1);
  return s;
}

inline std::string WeylSeries::str() const {
  if (terms_.empty()) return "0";
  std::string s;
  for (const auto& [m, c] : terms_) {
    if (!s.empty()) s += " + ";
    s += monomial_str(m, c, vars());
  }
  return s;
}

inline std::ostream& operator<<(std::ostream& os, const WeylSeries& f) { return os << f.str(); }

inline int total_degree(const WeylSeries& f) {
  int d = kMinusInfinity;
  for (const auto& [m, c] : f.terms()) d = std::max(d, m.weight());
  return d;
}

inline int min_degree(const WeylSeries& f) {
  if (f.is_zero()) return kMinusInfinity;
  int d = std::numeric_limits<int>::max();
  for (const auto& [m, c] : f.terms()) d = std::min(d, m.weight());
  return d;
}

// Drops all monomials with d-degree above N; the result carries trunc_N = min(N, f.trunc()).
inline WeylSeries truncate(const WeylSeries& f, int N) {
  if (N < 0) throw DomainError("truncation order must be non-negative");
  return f.with_trunc(std::min(N, f.trunc()));
}

// Secondary cutoff on the power of nu alone.
inline WeylSeries nu_truncate(const WeylSeries& f, int max_nu) {
  WeylSeries r(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms())
    if (m.nu <= max_nu) r.add(m, c);
  return r;
}

// Homogeneous part of d-degree exactly d.
inline WeylSeries degree_part(const WeylSeries& f, int d) {
  WeylSeries r(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms())
    if (m.weight() == d) r.add(m, c);
  return r;
}

// nu -> -nu on coefficients.
inline WeylSeries involution(const WeylSeries& f) {
  WeylSeries r(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms()) r.add(m, m.nu % 2 ? Rational(-c) : c);
  return r;
}

// Commutative product in z, Z, nu, with anticommuting dz.
inline WeylSeries pointwise_product(const WeylSeries& f, const WeylSeries& g) {
  if (f.dim_n() != g.dim_n()) throw DimensionMismatch("dim_n mismatch");
  WeylSeries r(f.dim_n(), std::min(f.trunc(), g.trunc()));
  for (const auto& [a, ca] : f.terms())
    for (const auto& [b, cb] : g.terms()) {
      if (a.weight() + b.weight() > r.trunc()) continue;
      int sign = wedge_sign(a.forms, b.forms);
      if (sign == 0) continue;
      Monomial m;
      m.nu = a.nu + b.nu;
      for (int i = 0; i < kMaxVars; ++i) {
        if (a.base[i] + b.base[i] > 255) throw DomainError("base exponent overflow");
        m.fiber[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(a.fiber[i] + b.fiber[i]);
        m.base[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(a.base[i] + b.base[i]);
      }
      m.forms = a.forms | b.forms;
      r.add(m, sign * ca * cb);
    }
  return r;
}

inline WeylSeries pointwise_power(const WeylSeries& f, int k) {
  WeylSeries r = WeylSeries::constant(f.dim_n(), f.trunc(), 1);
  for (int i = 0; i < k; ++i) r = pointwise_product(r, f);
  return r;
}

// Multiplies by nu^k (k may be negative when every term allows it).
inline WeylSeries shift_nu(const WeylSeries& f, int k, int out_N) {
  WeylSeries r(f.dim_n(), out_N);
  for (const auto& [m, c] : f.terms()) {
    Monomial x = m;
    x.nu += k;
    if (x.nu < 0) throw DomainError("series is not divisible by nu");
    r.add(x, c);
  }
  return r;
}

// Partial derivatives. Base derivatives leave the d-degree unchanged.
inline WeylSeries d_fiber(const WeylSeries& f, int i) {
  WeylSeries r(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms()) {
    int p = m.fiber[static_cast<std::size_t>(i)];
    if (p == 0) continue;
    Monomial x = m;
    --x.fiber[static_cast<std::size_t>(i)];
    r.add(x, c * p);
  }
  return r;
}

inline WeylSeries d_base(const WeylSeries& f, int i) {
  WeylSeries r(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms()) {
    int p = m.base[static_cast<std::size_t>(i)];
    if (p == 0) continue;
    Monomial x = m;
    --x.base[static_cast<std::size_t>(i)];
    r.add(x, c * p);
  }
  return r;
}

// Interior product of the form part with the i-th coordinate vector, applied from the left.
inline WeylSeries interior(const WeylSeries& f, int i) {
  WeylSeries r(f.dim_n(), f.trunc());
  const std::uint16_t bit = static_cast<std::uint16_t>(1u << i);
  for (const auto& [m, c] : f.terms()) {
    if (!(m.forms & bit)) continue;
    int before = std::popcount(static_cast<std::uint16_t>(m.forms & (bit - 1)));
    Monomial x = m;
    x.forms = static_cast<std::uint16_t>(m.forms & ~bit);
    r.add(x, before % 2 ? Rational(-c) : c);
  }
  return r;
}

inline int form_degree(const WeylSeries& f) {
  int d = 0;
  for (const auto& [m, c] : f.terms()) d = std::max(d, m.form_degree());
  return d;
}

inline bool is_base_only(const WeylSeries& f) {
  for (const auto& [m, c] : f.terms())
    if (m.fiber_degree() != 0 || m.forms != 0) return false;
  return true;
}

// Sets fiber variables to zero.
inline WeylSeries fiber_zero_part(const WeylSeries& f) {
  WeylSeries r(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms())
    if (m.fiber_degree() == 0) r.add(m, c);
  return r;
}

// Terms without fiber variables or forms (the central part in the Weyl algebra).
inline WeylSeries center_part(const WeylSeries& f) {
  WeylSeries r(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms())
    if (m.fiber_degree() == 0 && m.forms == 0) r.add(m, c);
  return r;
}

// Linear change of variables: the j-th fiber (or base) variable becomes sum_k M(j,k) times the k-th.
inline WeylSeries linear_substitute(const WeylSeries& f, const RatMatrix& M, bool fiber) {
  const int v = f.vars();
  if (M.rows() != v || M.cols() != v) throw DimensionMismatch("substitution matrix must be 2n x 2n");
  std::vector<std::vector<WeylSeries>> powers(static_cast<std::size_t>(v));
  for (int j = 0; j < v; ++j) {
    WeylSeries lin(f.dim_n(), f.trunc());
    for (int k = 0; k < v; ++k) {
      Monomial m;
      (fiber ? m.fiber : m.base)[static_cast<std::size_t>(k)] = 1;
      lin.add(m, M(j, k));
    }
    powers[static_cast<std::size_t>(j)].push_back(WeylSeries::constant(f.dim_n(), f.trunc(), 1));
    powers[static_cast<std::size_t>(j)].push_back(lin);
  }
  auto power = [&](int j, int e) -> const WeylSeries& {
    auto& p = powers[static_cast<std::size_t>(j)];
    while (static_cast<int>(p.size()) <= e) p.push_back(pointwise_product(p.back(), p[1]));
    return p[static_cast<std::size_t>(e)];
  };
  WeylSeries out(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms()) {
    Monomial rest = m;
    auto& e = fiber ? rest.fiber : rest.base;
    MultiIndex exps = e;
    e = MultiIndex{};
    WeylSeries acc = WeylSeries::term(f.dim_n(), f.trunc(), rest, c);
    for (int j = 0; j < v; ++j)
      if (exps[static_cast<std::size_t>(j)]) acc = pointwise_product(acc, power(j, exps[static_cast<std::size_t>(j)]));
    out += acc;
  }
  return out;
}

inline Rational max_abs_coeff(const WeylSeries& f) {
  Rational r = 0;
  for (const auto& [m, c] : f.terms()) r = std::max(r, abs(c));
  return r;
}

}  // namespace starforge
