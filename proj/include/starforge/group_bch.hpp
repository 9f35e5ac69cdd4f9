#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "starforge/matrix.hpp"
#include "starforge/moyal.hpp"
#include "starforge/series.hpp"
#include "starforge/weyl_functions.hpp"

namespace starforge {

// Terms that commute with everything in the fiber algebra: no fiber variables, no forms.
inline bool is_central(const Monomial& m) { return m.fiber_degree() == 0 && m.forms == 0; }

inline int min_noncentral_degree(const WeylSeries& X) {
  int d = kMinusInfinity;
  for (const auto& [m, c] : X.terms())
    if (!is_central(m) && (d == kMinusInfinity || m.weight() < d)) d = m.weight();
  return d;
}

// ad(X/nu) must raise the d-degree, i.e. every non-central term of X has d >= 3.
inline void validate_exponent(const WeylSeries& X) {
  for (const auto& [m, c] : X.terms()) {
    if (m.forms) throw DomainError("invalid exponent: contains differential forms");
    if (!is_central(m) && m.weight() < 3)
      throw DomainError("invalid exponent: term " + monomial_str(m, c, X.vars()) +
                        " has d-degree below 3, so ad does not raise degree");
  }
}

// e^{ad(X/nu)} a = sum_k (1/k!) ad(X/nu)^k a, truncated to out_N.
inline WeylSeries ad_exp(const WeylSeries& X, const WeylSeries& a, const SymplecticFrame& frame, int out_N) {
  validate_exponent(X);
  WeylSeries sum = a.with_trunc(out_N);
  WeylSeries term = sum;
  for (int k = 1; !term.is_zero(); ++k) {
    term = ad_nu(X, term, frame, out_N) * Rational(1, k);
    sum += term;
    if (k > out_N + 2) throw DomainError("ad_exp failed to terminate");
  }
  return sum;
}

namespace detail {

using Word = std::vector<char>;

// Dynkin coefficients of log(e^X e^Y), collected per right-nested bracket word.
inline std::map<Word, Rational> dynkin_words(int max_len) {
  std::map<Word, Rational> out;
  Word word;
  std::function<void(int, int, Rational)> rec = [&](int k, int len, Rational denom_prod) {
    if (k > 0) {
      Rational c = (k % 2 ? Rational(1) : Rational(-1)) / (Rational(k) * len * denom_prod);
      out[word] += c;
    }
    for (int r = 0; len + r <= max_len; ++r)
      for (int s = 0; len + r + s <= max_len; ++s) {
        if (r + s == 0) continue;
        const auto mark = word.size();
        word.insert(word.end(), static_cast<std::size_t>(r), 'X');
        word.insert(word.end(), static_cast<std::size_t>(s), 'Y');
        rec(k + 1, len + r + s, denom_prod * factorial(r) * factorial(s));
        word.resize(mark);
      }
  };
  rec(0, 0, 1);
  for (auto it = out.begin(); it != out.end();) it = it->second == 0 ? out.erase(it) : std::next(it);
  return out;
}

}  // namespace detail

using Bracket = std::function<WeylSeries(const WeylSeries&, const WeylSeries&)>;

// Dynkin series of log(e^X e^Y) for the given bracket, words of length <= max_len.
inline WeylSeries bch_with(const WeylSeries& X, const WeylSeries& Y, const Bracket& bracket, int max_len) {
  std::map<detail::Word, WeylSeries> values;
  std::function<const WeylSeries&(const detail::Word&)> value = [&](const detail::Word& w) -> const WeylSeries& {
    auto it = values.find(w);
    if (it != values.end()) return it->second;
    const WeylSeries& head = w.front() == 'X' ? X : Y;
    WeylSeries v(X.dim_n(), X.trunc());
    if (w.size() == 1) {
      v = head;
    } else {
      const WeylSeries& tail = value(detail::Word(w.begin() + 1, w.end()));
      if (!tail.is_zero()) v = bracket(head, tail);
    }
    return values.emplace(w, std::move(v)).first->second;
  };
  WeylSeries Z(X.dim_n(), X.trunc());
  for (const auto& [w, c] : detail::dynkin_words(max_len)) Z += value(w) * c;
  return Z;
}

// Exponent Z with e^{ad(Z/nu)} = e^{ad(X/nu)} o e^{ad(Y/nu)}: BCH series in the bracket (1/nu)[.,.],
// finite because every bracket raises the d-degree.
inline WeylSeries bch_series(const WeylSeries& X, const WeylSeries& Y, const SymplecticFrame& frame) {
  validate_exponent(X);
  validate_exponent(Y);
  if (X.trunc() != Y.trunc()) throw TruncationMismatch("exponent truncations differ");
  const int T = X.trunc();
  int d0 = kMinusInfinity;
  for (const auto* s : {&X, &Y}) {
    int d = min_noncentral_degree(*s);
    if (d != kMinusInfinity && (d0 == kMinusInfinity || d < d0)) d0 = d;
  }
  if (d0 == kMinusInfinity) return X + Y;
  const int max_len = std::max(1, (T - 2) / (d0 - 2));
  return bch_with(X, Y, [&](const WeylSeries& a, const WeylSeries& b) { return ad_nu(a, b, frame, T); }, max_len);
}

namespace detail {

inline WeylSeries swap_base_fiber(const WeylSeries& f, int N) {
  WeylSeries r(f.dim_n(), N);
  for (const auto& [m, c] : f.terms()) {
    Monomial x = m;
    std::swap(x.base, x.fiber);
    r.add(x, c);
  }
  return r;
}

inline int max_base_weight(const WeylSeries& f) {
  int w = 0;
  for (const auto& [m, c] : f.terms()) w = std::max(w, 2 * m.nu + m.base_degree());
  return w;
}

}  // namespace detail

// Moyal product on base polynomials, unbounded in base degree; nu powers kept while 2l <= f.trunc().
inline WeylSeries base_star(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame) {
  require_base_only(f, "base_star operand");
  require_base_only(g, "base_star operand");
  const int wf = detail::max_base_weight(f);
  const int wg = detail::max_base_weight(g);
  auto prod = moyal_product_to(detail::swap_base_fiber(f, wf), detail::swap_base_fiber(g, wg), frame, wf + wg);
  return detail::swap_base_fiber(prod, wf + wg).with_trunc(std::min(f.trunc(), g.trunc()));
}

// Bracket nu [f1, f2]_* on f-parts; f -> nu^2 f# carries it to (1/nu)[.,.] on exponents.
inline WeylSeries f_bracket(const WeylSeries& f1, const WeylSeries& f2, const SymplecticFrame& frame) {
  auto c = base_star(f1, f2, frame) - base_star(f2, f1, frame);
  return shift_nu(c, 1, f1.trunc());
}

// Exponent data H = g(nu^2) + nu^2 f#(nu^2); z-constants are kept in g.
struct GroupExponent {
  WeylSeries g_part;
  WeylSeries f_part;
  SymplecticFrame frame = SymplecticFrame::def41(1);
  int trunc_N = 0;

  static GroupExponent zero(const SymplecticFrame& frame, int N) {
    return make(WeylSeries(frame.dim_n(), N + 1), WeylSeries(frame.dim_n(), N + 1), frame, N);
  }

  static GroupExponent make(const WeylSeries& g, const WeylSeries& f, const SymplecticFrame& frame, int N) {
    require_base_only(g, "g_part");
    require_base_only(f, "f_part");
    if (!is_even_in_nu(g) || !is_even_in_nu(f)) throw DomainError("exponent parts must be even in nu");
    if (g.dim_n() != frame.dim_n() || f.dim_n() != frame.dim_n()) throw DimensionMismatch("dim_n mismatch");
    GroupExponent h;
    h.g_part = g.with_trunc(N + 1);
    h.f_part = WeylSeries(f.dim_n(), N + 1);
    // z-constants of f are central; keep them in g so the split is canonical.
    for (const auto& [m, c] : f.terms()) {
      if (m.base_degree() == 0) {
        Monomial x = m;
        x.nu += 2;
        h.g_part.add(x, c);
      } else {
        h.f_part.add(m, c);
      }
    }
    h.frame = frame;
    h.trunc_N = N;
    return h;
  }

  // H as a section, one degree above trunc_N so its action is exact through trunc_N.
  WeylSeries exponent() const {
    return g_part + shift_nu(weyl_continuation(f_part, frame), 2, trunc_N + 1);
  }

  GroupExponent operator-() const { return make(-g_part, -f_part, frame, trunc_N); }

  bool operator==(const GroupExponent& o) const {
    return g_part == o.g_part && f_part == o.f_part && frame == o.frame && trunc_N == o.trunc_N;
  }
};

inline WeylSeries ad_exp_apply(const GroupExponent& H, const WeylSeries& a) {
  if (a.trunc() != H.trunc_N) throw TruncationMismatch("truncation of the argument differs from the exponent");
  return ad_exp(H.exponent(), a, H.frame, H.trunc_N);
}

// BCH on exponent data: g parts are central and add, f parts compose under f_bracket.
inline GroupExponent bch_compose(const GroupExponent& H1, const GroupExponent& H2) {
  if (!(H1.frame == H2.frame)) throw DomainError("exponents live in different frames");
  if (H1.trunc_N != H2.trunc_N) throw TruncationMismatch("exponent truncations differ");
  const auto& frame = H1.frame;
  const int max_len = H1.f_part.trunc() / 4 + 1;
  auto f = bch_with(H1.f_part, H2.f_part,
                    [&](const WeylSeries& a, const WeylSeries& b) { return f_bracket(a, b, frame); }, max_len);
  return GroupExponent::make(H1.g_part + H2.g_part, f, frame, H1.trunc_N);
}

inline std::ostream& operator<<(std::ostream& os, const GroupExponent& h) {
  return os << "{g: " << h.g_part.str() << ", f: " << h.f_part.str() << ", N: " << h.trunc_N << "}";
}

// Inverse for the BCH law.
inline GroupExponent neg(const GroupExponent& H) { return -H; }

// Factorization Phi = A^ o e^{ad((c + F)/nu)}.
struct AutomorphismData {
  RatMatrix A;
  WeylSeries c_part;
  WeylSeries F_part;
};

// Images of Z^i under A^ o e^{ad(F/nu)}; A^ substitutes Z -> A Z.
inline std::vector<WeylSeries> realize_automorphism(const RatMatrix& A, const WeylSeries& F,
                                                    const SymplecticFrame& frame, int N) {
  std::vector<WeylSeries> images;
  for (int i = 0; i < frame.vars(); ++i) {
    auto e = ad_exp(F, WeylSeries::fiber(frame.dim_n(), N, i), frame, N);
    images.push_back(linear_substitute(e, A, true));
  }
  return images;
}

inline AutomorphismData factorize_automorphism(const std::vector<WeylSeries>& images, const SymplecticFrame& frame) {
  const int v = frame.vars();
  const int n = frame.dim_n();
  if (static_cast<int>(images.size()) != v) throw DimensionMismatch("expected one image per fiber generator");
  const int N = images.front().trunc();
  for (const auto& im : images) {
    if (im.dim_n() != n) throw DimensionMismatch("image dim_n mismatch");
    if (im.trunc() != N) throw TruncationMismatch("image truncations differ");
    for (const auto& [m, c] : im.terms()) {
      if (m.base_degree() || m.forms) throw DomainError("images must be fiber polynomials");
      if (m.weight() == 0) throw DomainError("images have constant terms");
    }
  }

  RatMatrix A(v, v);
  for (int i = 0; i < v; ++i)
    for (int j = 0; j < v; ++j) {
      Monomial m;
      m.fiber[static_cast<std::size_t>(j)] = 1;
      A(i, j) = images[static_cast<std::size_t>(i)].coeff(m);
    }
  if (A.det() == 0) throw DomainError("degree-1 part of the images is not invertible");
  if (!(A * frame.lambda() * A.transpose() == frame.lambda()))
    throw CcrViolation("degree-1 part is not symplectic: A Lambda A^T != Lambda", 1);

  const RatMatrix Ainv = A.inverse();
  std::vector<WeylSeries> psi;
  for (const auto& im : images) psi.push_back(linear_substitute(im, Ainv, true));

  WeylSeries F(n, N + 1);
  for (int d = 2; d <= N; ++d) {
    std::vector<WeylSeries> D;
    for (int i = 0; i < v; ++i) {
      auto res = psi[static_cast<std::size_t>(i)] - ad_exp(F, WeylSeries::fiber(n, N, i), frame, N);
      if (min_degree(res) != kMinusInfinity && min_degree(res) < d)
        throw CcrViolation("residual left below the current degree", min_degree(res));
      D.push_back(degree_part(res, d));
    }
    // d_k G = -omega_{ki} D^i.
    std::vector<WeylSeries> h;
    for (int k = 0; k < v; ++k) {
      WeylSeries hk(n, N + 1);
      for (int i = 0; i < v; ++i)
        if (frame.omega(k, i) != 0) hk += D[static_cast<std::size_t>(i)].with_trunc(N + 1) * (-frame.omega(k, i));
      h.push_back(hk);
    }
    for (int j = 0; j < v; ++j)
      for (int k = j + 1; k < v; ++k) {
        auto curl = d_fiber(h[static_cast<std::size_t>(j)], k) - d_fiber(h[static_cast<std::size_t>(k)], j);
        if (!curl.is_zero())
          throw CcrViolation("images violate the CCR: defect " + curl.str(), d);
      }
    WeylSeries G(n, N + 1);
    for (int k = 0; k < v; ++k)
      for (const auto& [m, c] : h[static_cast<std::size_t>(k)].terms()) {
        Monomial x = m;
        ++x.fiber[static_cast<std::size_t>(k)];
        G.add(x, c / (m.fiber_degree() + 1));
      }
    F += G;
  }
  for (int i = 0; i < v; ++i) {
    auto res = psi[static_cast<std::size_t>(i)] - ad_exp(F, WeylSeries::fiber(n, N, i), frame, N);
    if (!res.is_zero()) throw CcrViolation("factorization residual does not vanish", min_degree(res));
  }
  return AutomorphismData{A, WeylSeries(n, N + 1), F};
}

// A curve t -> sum_j t^j X_j of exponents.
struct ExponentCurve {
  std::vector<WeylSeries> coeffs;

  WeylSeries at(const Rational& t) const {
    WeylSeries out = coeffs.front() * Rational(0);
    Rational p = 1;
    for (const auto& c : coeffs) {
      out += c * p;
      p *= t;
    }
    return out;
  }
};

// e^{X(t_{m-1}) dt} o ... o e^{X(t_0) dt} on the uniform partition t_i = i/m, later factors on the left.
inline WeylSeries product_integral_series(const ExponentCurve& X, int mesh_m, const SymplecticFrame& frame) {
  if (mesh_m < 1) throw DomainError("mesh_m must be at least 1");
  if (X.coeffs.empty()) throw DomainError("empty exponent curve");
  const Rational dt(1, mesh_m);
  WeylSeries acc = X.at(0) * dt;
  for (int i = 1; i < mesh_m; ++i) acc = bch_series(X.at(Rational(i, mesh_m)) * dt, acc, frame);
  return acc;
}

inline GroupExponent product_integral(const std::vector<GroupExponent>& curve, int mesh_m) {
  if (curve.empty()) throw DomainError("empty exponent curve");
  if (mesh_m < 1) throw DomainError("mesh_m must be at least 1");
  const auto& frame = curve.front().frame;
  const int N = curve.front().trunc_N;
  auto at = [&](const Rational& t) {
    WeylSeries g(frame.dim_n(), N + 1), f(frame.dim_n(), N + 1);
    Rational p = Rational(1, mesh_m);
    for (const auto& h : curve) {
      g += h.g_part * p;
      f += h.f_part * p;
      p *= t;
    }
    return GroupExponent::make(g, f, frame, N);
  };
  GroupExponent acc = at(0);
  for (int i = 1; i < mesh_m; ++i) acc = bch_compose(at(Rational(i, mesh_m)), acc);
  return acc;
}

// Value at h = 0 of the interpolating polynomial through (1/m_k, values_k).
inline WeylSeries extrapolate_to_zero(const std::vector<int>& meshes, const std::vector<WeylSeries>& values) {
  WeylSeries out = values.front() * Rational(0);
  for (std::size_t k = 0; k < meshes.size(); ++k) {
    Rational w = 1;
    const Rational hk(1, meshes[k]);
    for (std::size_t j = 0; j < meshes.size(); ++j)
      if (j != k) {
        const Rational hj(1, meshes[j]);
        w *= (0 - hj) / (hk - hj);
      }
    out += values[k] * w;
  }
  return out;
}

// The mesh-m exponent is a polynomial in 1/m, so exact extrapolation from enough meshes is the limit.
// Meshes are added until two successive extrapolations agree.
inline WeylSeries product_integral_limit(const ExponentCurve& X, const SymplecticFrame& frame, int max_mesh = 24) {
  std::vector<int> meshes;
  std::vector<WeylSeries> values;
  WeylSeries prev;
  int agree = 0;
  for (int m = 1; m <= max_mesh; ++m) {
    meshes.push_back(m);
    values.push_back(product_integral_series(X, m, frame));
    WeylSeries est = extrapolate_to_zero(meshes, values);
    if (m > 1 && est == prev) {
      if (++agree == 2) return est;
    } else {
      agree = 0;
    }
    prev = est;
  }
  throw DomainError("product integral extrapolation did not stabilize");
}

}  // namespace starforge
