#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/frame.hpp"
#include "starforge/rational.hpp"
#include "starforge/series.hpp"

namespace starforge {

// Polynomial in dim commuting variables x1..x_dim with rational coefficients.
class Poly {
 public:
  using Terms = std::map<MultiIndex, Rational>;

  Poly() = default;
  explicit Poly(int dim) : dim_(dim) {
    if (dim < 1 || dim > kMaxVars) throw DimensionMismatch("polynomial dimension must lie in 1..8");
  }

  static Poly constant(int dim, const Rational& c) {
    Poly p(dim);
    p.add(MultiIndex{}, c);
    return p;
  }
  static Poly var(int dim, int i) {
    Poly p(dim);
    MultiIndex a{};
    a.at(static_cast<std::size_t>(i)) = 1;
    p.add(a, 1);
    return p;
  }
  static Poly monomial(int dim, const MultiIndex& a, const Rational& c = 1) {
    Poly p(dim);
    p.add(a, c);
    return p;
  }

  int dim() const { return dim_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  void add(const MultiIndex& a, const Rational& c) {
    if (c == 0) return;
    for (int i = dim_; i < kMaxVars; ++i)
      if (a[static_cast<std::size_t>(i)]) throw DimensionMismatch("variable index beyond dim");
    auto [it, inserted] = terms_.try_emplace(a, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  Poly& operator+=(const Poly& o) {
    check(o);
    for (const auto& [a, c] : o.terms_) add(a, c);
    return *this;
  }
  Poly& operator-=(const Poly& o) {
    check(o);
    for (const auto& [a, c] : o.terms_) add(a, -c);
    return *this;
  }
  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
  Poly operator-() const { return *this * Rational(-1); }
  Poly operator*(const Rational& s) const {
    Poly r(dim_);
    if (s == 0) return r;
    for (const auto& [a, c] : terms_) r.terms_.emplace(a, c * s);
    return r;
  }
  friend Poly operator*(const Poly& p, const Poly& q) {
    p.check(q);
    Poly r(p.dim_);
    for (const auto& [a, c] : p.terms_)
      for (const auto& [b, d] : q.terms_) {
        MultiIndex e{};
        for (int i = 0; i < p.dim_; ++i) {
          const auto u = static_cast<std::size_t>(i);
          e[u] = static_cast<std::uint8_t>(a[u] + b[u]);
        }
        r.add(e, c * d);
      }
    return r;
  }

  bool operator==(const Poly& o) const { return dim_ == o.dim_ && terms_ == o.terms_; }

  Poly derivative(int i) const {
    Poly r(dim_);
    const auto u = static_cast<std::size_t>(i);
    for (const auto& [a, c] : terms_) {
      if (a[u] == 0) continue;
      MultiIndex b = a;
      --b[u];
      r.add(b, c * a[u]);
    }
    return r;
  }

  Poly derivative(const MultiIndex& alpha) const {
    Poly r = *this;
    for (int i = 0; i < dim_ && !r.is_zero(); ++i)
      for (int k = 0; k < alpha[static_cast<std::size_t>(i)]; ++k) r = r.derivative(i);
    return r;
  }

  int degree() const {
    int d = -1;
    for (const auto& [a, c] : terms_) d = std::max(d, order(a));
    return d;
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string s;
    for (const auto& [a, c] : terms_) {
      if (!s.empty()) s += " + ";
      s += c.get_str();
      for (int i = 0; i < dim_; ++i) {
        const int p = a[static_cast<std::size_t>(i)];
        if (p == 0) continue;
        s += " * x" + std::to_string(i + 1);
        if (p > 1) s += "^" + std::to_string(p);
      }
    }
    return s;
  }

 private:
  void check(const Poly& o) const {
    if (dim_ != o.dim_) throw DimensionMismatch("polynomial dimension mismatch");
  }

  int dim_ = 1;
  Terms terms_;
};

inline std::ostream& operator<<(std::ostream& os, const Poly& p) { return os << p.str(); }

// All monomials x^a with |a| <= max_degree.
inline std::vector<Poly> monomial_basis(int dim, int max_degree) {
  std::vector<Poly> out;
  MultiIndex a{};
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == dim) {
      out.push_back(Poly::monomial(dim, a));
      return;
    }
    for (int k = 0; k <= left; ++k) {
      a[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(k);
      rec(i + 1, left - k);
    }
    a[static_cast<std::size_t>(i)] = 0;
  };
  rec(0, max_degree);
  return out;
}

// ---- Polyvector fields as polynomials in odd variables xi_i = d/dx_i.

// Element of Gamma(wedge^{k+1} T): sum over increasing index sets I of P^I xi_I.
class PolyVector {
 public:
  PolyVector() = default;
  PolyVector(int dim, int degree) : dim_(dim), k_(degree) {
    if (degree < -1) throw DomainError("polyvector degree must be >= -1");
  }

  // Coefficient functions (k = -1).
  static PolyVector function(const Poly& f) {
    PolyVector p(f.dim(), -1);
    p.add(0, f);
    return p;
  }
  static PolyVector vector_field(const std::vector<Poly>& X) {
    PolyVector p(static_cast<int>(X.size()), 0);
    for (std::size_t i = 0; i < X.size(); ++i) p.add(static_cast<std::uint16_t>(1u << i), X[i]);
    return p;
  }
  // Bivector from an antisymmetric matrix of coefficients: 1/2 pi^{ij} xi_i xi_j.
  static PolyVector bivector(const std::vector<std::vector<Poly>>& pi) {
    const int d = static_cast<int>(pi.size());
    PolyVector p(d, 1);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const auto& a = pi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        const auto& b = pi[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        if (!(a + b).is_zero()) throw DomainError("bivector coefficients must be antisymmetric");
        if (i < j) p.add(static_cast<std::uint16_t>((1u << i) | (1u << j)), a);
      }
    return p;
  }

  int dim() const { return dim_; }
  int degree() const { return k_; }
  const std::map<std::uint16_t, Poly>& components() const { return comps_; }

  // Adds f xi_I with I given by a bitmask (increasing order).
  void add(std::uint16_t mask, const Poly& f) {
    if (std::popcount(mask) != k_ + 1) throw DomainError("polyvector component has the wrong degree");
    if (mask >> dim_) throw DimensionMismatch("polyvector index beyond dim");
    if (f.dim() != dim_) throw DimensionMismatch("coefficient dimension mismatch");
    if (f.is_zero()) return;
    auto [it, inserted] = comps_.try_emplace(mask, f);
    if (!inserted) {
      it->second += f;
      if (it->second.is_zero()) comps_.erase(it);
    }
  }

  // Coefficient of xi_{i0} ... xi_{ik} for an arbitrary index tuple (antisymmetric).
  Poly component(const std::vector<int>& idx) const {
    std::uint16_t mask = 0;
    int sign = 1;
    for (int i : idx) {
      const auto bit = static_cast<std::uint16_t>(1u << i);
      const int s = wedge_sign(mask, bit);
      if (s == 0) return Poly(dim_);
      sign *= s;
      mask = static_cast<std::uint16_t>(mask | bit);
    }
    auto it = comps_.find(mask);
    if (it == comps_.end()) return Poly(dim_);
    return sign > 0 ? it->second : -it->second;
  }

  bool is_zero() const { return comps_.empty(); }
  bool operator==(const PolyVector& o) const { return dim_ == o.dim_ && k_ == o.k_ && comps_ == o.comps_; }

  PolyVector operator+(const PolyVector& o) const {
    if (o.k_ != k_ || o.dim_ != dim_) throw DomainError("adding polyvectors of different degree");
    PolyVector r = *this;
    for (const auto& [m, f] : o.comps_) r.add(m, f);
    return r;
  }
  PolyVector operator*(const Rational& s) const {
    PolyVector r(dim_, k_);
    for (const auto& [m, f] : comps_) r.add(m, f * s);
    return r;
  }

  std::string str() const {
    if (comps_.empty()) return "0";
    std::string s;
    for (const auto& [m, f] : comps_) {
      if (!s.empty()) s += " + ";
      s += "(" + f.str() + ")";
      for (int i = 0; i < dim_; ++i)
        if (m & (1u << i)) s += " d" + std::to_string(i + 1);
    }
    return s;
  }

 private:
  int dim_ = 1;
  int k_ = -1;
  std::map<std::uint16_t, Poly> comps_;
};

inline std::ostream& operator<<(std::ostream& os, const PolyVector& p) { return os << p.str(); }

namespace detail {

// Right derivative d/dxi_i of xi_I: sign of moving xi_i to the end.
inline int right_xi_sign(std::uint16_t mask, int i) {
  return std::popcount(static_cast<std::uint16_t>(mask >> (i + 1))) % 2 ? -1 : 1;
}
// Left derivative: sign of moving xi_i to the front.
inline int left_xi_sign(std::uint16_t mask, int i) {
  return std::popcount(static_cast<std::uint16_t>(mask & ((1u << i) - 1))) % 2 ? -1 : 1;
}

}  // namespace detail

// [P, Q] = sum_i (P <-d_{xi_i}) (d_{x_i} Q) - (P <-d_{x_i}) (d_{xi_i}-> Q): the Lie bracket on vector fields,
// shifted degree k_P + k_Q.
inline PolyVector schouten(const PolyVector& P, const PolyVector& Q) {
  if (P.dim() != Q.dim()) throw DimensionMismatch("polyvector dimension mismatch");
  const int d = P.dim();
  const int k = P.degree() + Q.degree();
  // Two functions bracket to zero; degrees above dim - 1 have no components.
  if (k < -1) return PolyVector(d, -1);
  PolyVector out(d, k);
  for (const auto& [mp, fp] : P.components())
    for (const auto& [mq, fq] : Q.components())
      for (int i = 0; i < d; ++i) {
        const auto bit = static_cast<std::uint16_t>(1u << i);
        if (mp & bit) {
          const auto rest = static_cast<std::uint16_t>(mp & ~bit);
          const int s = wedge_sign(rest, mq);
          if (s != 0) {
            const auto dq = fq.derivative(i);
            if (!dq.is_zero())
              out.add(static_cast<std::uint16_t>(rest | mq), fp * dq * Rational(detail::right_xi_sign(mp, i) * s));
          }
        }
        if (mq & bit) {
          const auto rest = static_cast<std::uint16_t>(mq & ~bit);
          const int s = wedge_sign(mp, rest);
          if (s != 0) {
            const auto dp = fp.derivative(i);
            if (!dp.is_zero())
              out.add(static_cast<std::uint16_t>(mp | rest), dp * fq * Rational(-detail::left_xi_sign(mq, i) * s));
          }
        }
      }
  return out;
}

// {f, g} = pi^{ij} d_i f d_j g for a bivector.
inline Poly bivector_bracket(const PolyVector& pi, const Poly& f, const Poly& g) {
  if (pi.degree() != 1) throw DomainError("bivector expected");
  Poly out(pi.dim());
  for (int i = 0; i < pi.dim(); ++i)
    for (int j = 0; j < pi.dim(); ++j) {
      auto c = pi.component({i, j});
      if (c.is_zero()) continue;
      out += c * f.derivative(i) * g.derivative(j);
    }
  return out;
}

// ---- Polydifferential operators: sum of c(x) d^{alpha_0} a_0 ... d^{alpha_k} a_k.

class PolyDiffOp {
 public:
  using Key = std::vector<MultiIndex>;

  PolyDiffOp() = default;
  PolyDiffOp(int dim, int degree) : dim_(dim), k_(degree) {
    if (degree < -1) throw DomainError("cochain degree must be >= -1");
  }

  // a0 * a1 (pointwise multiplication, degree 1).
  static PolyDiffOp multiplication(int dim) {
    PolyDiffOp m(dim, 1);
    m.add({MultiIndex{}, MultiIndex{}}, Poly::constant(dim, 1));
    return m;
  }
  static PolyDiffOp identity(int dim) {
    PolyDiffOp m(dim, 0);
    m.add({MultiIndex{}}, Poly::constant(dim, 1));
    return m;
  }
  // Bidifferential part of order k of the Moyal product: (1/k!) (1/2)^k (Lambda^{ij} d_i (x) d_j)^k.
  static PolyDiffOp moyal_term(const SymplecticFrame& frame, int k) {
    PolyDiffOp m(frame.vars(), 1);
    const Rational half_k = Rational(1, 1 << k);
    for (const auto& t : frame.bidiff(k)) m.add({t.alpha, t.beta}, Poly::constant(frame.vars(), t.coeff * half_k));
    return m;
  }

  int dim() const { return dim_; }
  int degree() const { return k_; }
  int arity() const { return k_ + 1; }
  const std::map<Key, Poly>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  void add(const Key& key, const Poly& c) {
    if (static_cast<int>(key.size()) != arity()) throw DomainError("operator term has the wrong arity");
    if (c.dim() != dim_) throw DimensionMismatch("coefficient dimension mismatch");
    if (c.is_zero()) return;
    auto [it, inserted] = terms_.try_emplace(key, c);
    if (!inserted) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  PolyDiffOp& operator+=(const PolyDiffOp& o) {
    same(o);
    for (const auto& [k, c] : o.terms_) add(k, c);
    return *this;
  }
  friend PolyDiffOp operator+(PolyDiffOp a, const PolyDiffOp& b) { return a += b; }
  friend PolyDiffOp operator-(PolyDiffOp a, const PolyDiffOp& b) { return a += b * Rational(-1); }
  PolyDiffOp operator*(const Rational& s) const {
    PolyDiffOp r(dim_, k_);
    for (const auto& [k, c] : terms_) r.add(k, c * s);
    return r;
  }
  bool operator==(const PolyDiffOp& o) const { return dim_ == o.dim_ && k_ == o.k_ && terms_ == o.terms_; }

  Poly operator()(const std::vector<Poly>& args) const {
    if (static_cast<int>(args.size()) != arity()) throw DomainError("wrong number of operator arguments");
    Poly out(dim_);
    for (const auto& [key, c] : terms_) {
      Poly acc = c;
      for (std::size_t a = 0; a < args.size() && !acc.is_zero(); ++a) acc = acc * args[a].derivative(key[a]);
      out += acc;
    }
    return out;
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string s;
    for (const auto& [key, c] : terms_) {
      if (!s.empty()) s += " + ";
      s += "(" + c.str() + ")";
      for (std::size_t a = 0; a < key.size(); ++a) {
        s += " D[";
        for (int i = 0; i < dim_; ++i) s += (i ? "," : "") + std::to_string(key[a][static_cast<std::size_t>(i)]);
        s += "]a" + std::to_string(a);
      }
    }
    return s;
  }

 private:
  void same(const PolyDiffOp& o) const {
    if (dim_ != o.dim_) throw DimensionMismatch("operator dimension mismatch");
    if (k_ != o.k_) throw DomainError("adding operators of different degree");
  }

  int dim_ = 1;
  int k_ = 0;
  std::map<Key, Poly> terms_;
};

inline std::ostream& operator<<(std::ostream& os, const PolyDiffOp& p) { return os << p.str(); }

namespace detail {

// Splits alpha into parts gamma_0 + ... + gamma_{m-1}, calling fn with the parts and the multinomial weight.
inline void split_multi_index(const MultiIndex& alpha, int parts, int dim,
                              const std::function<void(const std::vector<MultiIndex>&, const Rational&)>& fn) {
  std::vector<MultiIndex> g(static_cast<std::size_t>(parts), MultiIndex{});
  std::function<void(int, int, int, Rational)> rec = [&](int var, int part, int left, Rational w) {
    if (var == dim) {
      fn(g, w);
      return;
    }
    const auto u = static_cast<std::size_t>(var);
    if (part == parts - 1) {
      g[static_cast<std::size_t>(part)][u] = static_cast<std::uint8_t>(left);
      const int next = var + 1;
      rec(next, 0, next < dim ? alpha[static_cast<std::size_t>(next)] : 0, w / factorial(left));
      return;
    }
    for (int e = 0; e <= left; ++e) {
      g[static_cast<std::size_t>(part)][u] = static_cast<std::uint8_t>(e);
      rec(var, part + 1, left - e, w / factorial(e));
    }
  };
  Rational w0 = 1;
  for (int i = 0; i < dim; ++i) w0 *= factorial(alpha[static_cast<std::size_t>(i)]);
  rec(0, 0, alpha[0], w0);
}

inline MultiIndex add_index(const MultiIndex& a, const MultiIndex& b) {
  MultiIndex c{};
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<std::uint8_t>(a[i] + b[i]);
  return c;
}

}  // namespace detail

// phi1(a_0, .., a_{i-1}, phi2(a_i, .., a_{i+k2}), ..) as an operator, via Leibniz.
inline PolyDiffOp insert_at(const PolyDiffOp& phi1, const PolyDiffOp& phi2, int slot) {
  const int dim = phi1.dim();
  const int k2 = phi2.degree();
  PolyDiffOp out(dim, phi1.degree() + k2);
  const int a2 = phi2.arity();
  for (const auto& [key1, c1] : phi1.terms())
    for (const auto& [key2, c2] : phi2.terms()) {
      // Derivative alpha of slot falls on c2 and on each of phi2's arguments.
      detail::split_multi_index(key1[static_cast<std::size_t>(slot)], a2 + 1, dim,
                                [&](const std::vector<MultiIndex>& g, const Rational& w) {
                                  Poly c = c2.derivative(g[0]);
                                  if (c.is_zero()) return;
                                  PolyDiffOp::Key key;
                                  for (int j = 0; j < slot; ++j) key.push_back(key1[static_cast<std::size_t>(j)]);
                                  for (int j = 0; j < a2; ++j)
                                    key.push_back(detail::add_index(key2[static_cast<std::size_t>(j)],
                                                                    g[static_cast<std::size_t>(j + 1)]));
                                  for (int j = slot + 1; j < phi1.arity(); ++j) key.push_back(key1[static_cast<std::size_t>(j)]);
                                  out.add(key, c1 * c * w);
                                });
    }
  return out;
}

// phi1 o^ phi2 = sum_i (-1)^{i k2} phi1(.., phi2(a_i, ..), ..).
inline PolyDiffOp gerstenhaber_compose(const PolyDiffOp& phi1, const PolyDiffOp& phi2) {
  if (phi1.dim() != phi2.dim()) throw DimensionMismatch("operator dimension mismatch");
  PolyDiffOp out(phi1.dim(), phi1.degree() + phi2.degree());
  if (phi1.degree() < 0) return out;
  for (int i = 0; i <= phi1.degree(); ++i) {
    const Rational s = (i * phi2.degree()) % 2 ? -1 : 1;
    out += insert_at(phi1, phi2, i) * s;
  }
  return out;
}

// [phi1, phi2]_G = phi1 o^ phi2 - (-1)^{k1 k2} phi2 o^ phi1.
inline PolyDiffOp gerstenhaber(const PolyDiffOp& phi1, const PolyDiffOp& phi2) {
  const Rational s = (phi1.degree() * phi2.degree()) % 2 ? -1 : 1;
  return gerstenhaber_compose(phi1, phi2) - gerstenhaber_compose(phi2, phi1) * s;
}

// delta(phi) = (-1)^k [product, phi]_G.
inline PolyDiffOp hochschild_d(const PolyDiffOp& phi, const PolyDiffOp& product) {
  if (product.degree() != 1) throw DomainError("product must take two arguments");
  const Rational s = phi.degree() % 2 ? -1 : 1;
  return gerstenhaber(product, phi) * s;
}

// Monomial tuples spanning the test space: every argument a monomial of degree <= max_degree.
inline bool vanishes_on_monomials(const PolyDiffOp& op, int max_degree) {
  const auto basis = monomial_basis(op.dim(), max_degree);
  std::vector<Poly> args(static_cast<std::size_t>(op.arity()), Poly(op.dim()));
  std::function<bool(int)> rec = [&](int a) {
    if (a == op.arity()) return op(args).is_zero();
    for (const auto& m : basis) {
      args[static_cast<std::size_t>(a)] = m;
      if (!rec(a + 1)) return false;
    }
    return true;
  };
  return rec(0);
}

template <class Defect>
struct MCDefect {
  // Keyed by nu order (1 for the Poisson check).
  std::map<int, Defect> by_order;
  bool zero = true;

  int first_nonzero_order() const {
    for (const auto& [o, d] : by_order)
      if (!d.is_zero()) return o;
    return 0;
  }
};

inline MCDefect<PolyVector> mc_defect_poisson(const PolyVector& pi) {
  if (pi.degree() != 1) throw DomainError("mc_defect_poisson expects a bivector");
  MCDefect<PolyVector> d;
  d.by_order[1] = schouten(pi, pi);
  d.zero = d.by_order[1].is_zero();
  return d;
}

inline constexpr int kDefaultTestDegree = 3;

// Defect at nu^m: [mu, B_m]_G + 1/2 sum_{i+j=m} [B_i, B_j]_G, which is (f*g)*h - f*(g*h) at that order.
inline MCDefect<PolyDiffOp> mc_defect_star(const std::map<int, PolyDiffOp>& B, int order_N,
                                           int test_degree = kDefaultTestDegree) {
  if (B.empty()) throw DomainError("mc_defect_star needs at least one term to fix the dimension");
  const int dim = B.begin()->second.dim();
  for (const auto& [o, b] : B) {
    if (o < 1) throw DomainError("B terms start at nu^1");
    if (b.degree() != 1 || b.dim() != dim) throw DomainError("B terms must be bidifferential operators");
  }
  const auto mu = PolyDiffOp::multiplication(dim);
  MCDefect<PolyDiffOp> d;
  for (int m = 1; m <= order_N; ++m) {
    PolyDiffOp acc(dim, 2);
    if (auto it = B.find(m); it != B.end()) acc += gerstenhaber(mu, it->second);
    for (int i = 1; i < m; ++i) {
      auto bi = B.find(i);
      auto bj = B.find(m - i);
      if (bi == B.end() || bj == B.end()) continue;
      acc += gerstenhaber(bi->second, bj->second) * Rational(1, 2);
    }
    if (!vanishes_on_monomials(acc, test_degree)) d.zero = false;
    d.by_order[m] = acc;
  }
  return d;
}

// B_k = nu^k part of the Moyal product on base functions.
inline std::map<int, PolyDiffOp> moyal_tail_cochains(const SymplecticFrame& frame, int order_N) {
  std::map<int, PolyDiffOp> B;
  for (int k = 1; k <= order_N; ++k) B[k] = PolyDiffOp::moyal_term(frame, k);
  return B;
}

}  // namespace starforge
