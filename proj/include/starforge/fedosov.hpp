#pragma once

#include <bit>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/frame.hpp"
#include "starforge/moyal.hpp"
#include "starforge/series.hpp"
#include "starforge/weyl_functions.hpp"

namespace starforge {

using FormSection = WeylSeries;

inline constexpr int kMaxFormDegree = 2;

// Symplectic connection on the flat chart, stored lowered: Gamma_{mkl} = omega_{mi} Gamma^i_{kl},
// constant and totally symmetric.
class SymplecticConnection {
 public:
  SymplecticConnection() = default;

  static SymplecticConnection zero(int vars) {
    SymplecticConnection c;
    c.vars_ = vars;
    c.low_.assign(static_cast<std::size_t>(vars * vars * vars), 0);
    return c;
  }

  static SymplecticConnection from_lowered(const SymplecticFrame& frame, std::vector<Rational> low) {
    const int v = frame.vars();
    if (static_cast<int>(low.size()) != v * v * v) throw DimensionMismatch("connection tensor needs (2n)^3 entries");
    SymplecticConnection c;
    c.vars_ = v;
    c.low_ = std::move(low);
    c.check_symmetric();
    return c;
  }

  // Gamma^k_{ij} indexed [k][i][j]; symmetric in i, j and symplectic (lowered tensor totally symmetric).
  static SymplecticConnection from_christoffel(const SymplecticFrame& frame, const std::vector<Rational>& up) {
    const int v = frame.vars();
    if (static_cast<int>(up.size()) != v * v * v) throw DimensionMismatch("connection tensor needs (2n)^3 entries");
    std::vector<Rational> low(up.size(), 0);
    for (int m = 0; m < v; ++m)
      for (int k = 0; k < v; ++k)
        for (int l = 0; l < v; ++l) {
          Rational s = 0;
          for (int i = 0; i < v; ++i) s += frame.omega(m, i) * up[static_cast<std::size_t>((i * v + k) * v + l)];
          low[static_cast<std::size_t>((m * v + k) * v + l)] = s;
        }
    return from_lowered(frame, std::move(low));
  }

  int vars() const { return vars_; }
  const Rational& lowered(int m, int k, int l) const { return low_[static_cast<std::size_t>((m * vars_ + k) * vars_ + l)]; }

  std::vector<Rational> christoffel(const SymplecticFrame& frame) const {
    const int v = vars_;
    std::vector<Rational> up(low_.size(), 0);
    for (int i = 0; i < v; ++i)
      for (int k = 0; k < v; ++k)
        for (int l = 0; l < v; ++l) {
          Rational s = 0;
          for (int m = 0; m < v; ++m) s += frame.lambda(i, m) * lowered(m, k, l);
          up[static_cast<std::size_t>((i * v + k) * v + l)] = s;
        }
    return up;
  }

  bool is_zero() const {
    for (const auto& x : low_)
      if (sgn(x) != 0) return false;
    return true;
  }

 private:
  void check_symmetric() const {
    for (int m = 0; m < vars_; ++m)
      for (int k = 0; k < vars_; ++k)
        for (int l = 0; l < vars_; ++l) {
          const auto& x = lowered(m, k, l);
          if (x != lowered(k, m, l) || x != lowered(m, l, k))
            throw DomainError("connection is not symplectic and torsion-free (lowered tensor not totally symmetric)");
        }
  }

  int vars_ = 0;
  std::vector<Rational> low_;
};

struct FedosovState {
  SymplecticFrame frame;
  SymplecticConnection gamma;
  FormSection curvature;
  int trunc_N = 0;
  FormSection r;

  FedosovState(SymplecticFrame f, SymplecticConnection g, FormSection R, int N)
      : frame(std::move(f)), gamma(std::move(g)), curvature(std::move(R)), trunc_N(N), r(frame.dim_n(), N) {
    if (gamma.vars() != frame.vars()) throw DimensionMismatch("connection size differs from 2n");
    if (curvature.dim_n() != frame.dim_n()) throw DimensionMismatch("curvature dim_n differs from frame");
    if (N < 0) throw DomainError("trunc_N must be non-negative");
  }
};

namespace detail {

inline void check_form_degree(const FormSection& a, int max_degree, const char* what) {
  for (const auto& [m, c] : a.terms())
    if (m.form_degree() > max_degree) throw DomainError(std::string(what) + ": form-degree overflow");
}

inline FormSection wedge_front(const FormSection& a, int k) {
  FormSection r(a.dim_n(), a.trunc());
  const auto bit = static_cast<std::uint16_t>(1u << k);
  for (const auto& [m, c] : a.terms()) {
    const int s = wedge_sign(bit, m.forms);
    if (s == 0) continue;
    Monomial x = m;
    x.forms = static_cast<std::uint16_t>(m.forms | bit);
    r.add(x, s > 0 ? c : Rational(-c));
  }
  return r;
}

}  // namespace detail

// theta = omega_{ij} dz^i Z^j, so delta = ad(theta / nu).
inline FormSection theta_form(const SymplecticFrame& frame, int N) {
  FormSection t(frame.dim_n(), N);
  for (int i = 0; i < frame.vars(); ++i)
    for (int j = 0; j < frame.vars(); ++j) {
      if (sgn(frame.omega(i, j)) == 0) continue;
      Monomial m;
      m.forms = static_cast<std::uint16_t>(1u << i);
      ++m.fiber[static_cast<std::size_t>(j)];
      t.add(m, frame.omega(i, j));
    }
  return t;
}

// delta a = dz^k d/dZ^k a, the closed form of ad(theta / nu).
inline FormSection delta(const FormSection& a, const SymplecticFrame& frame) {
  if (a.dim_n() != frame.dim_n()) throw DimensionMismatch("dim_n mismatch");
  detail::check_form_degree(a, kMaxFormDegree - 1, "delta");
  FormSection r(a.dim_n(), a.trunc());
  for (int k = 0; k < frame.vars(); ++k) r += detail::wedge_front(d_fiber(a, k), k);
  return r;
}

// On fiber degree p, form degree q: Z^k i(d/dz^k) a / (p + q), and 0 when p + q = 0.
inline FormSection delta_inv(const FormSection& a, const SymplecticFrame& frame) {
  if (a.dim_n() != frame.dim_n()) throw DimensionMismatch("dim_n mismatch");
  FormSection r(a.dim_n(), a.trunc());
  for (const auto& [m, c] : a.terms()) {
    const int pq = m.fiber_degree() + m.form_degree();
    if (pq == 0) continue;
    for (int k = 0; k < frame.vars(); ++k) {
      const auto bit = static_cast<std::uint16_t>(1u << k);
      if (!(m.forms & bit)) continue;
      const int before = std::popcount(static_cast<std::uint16_t>(m.forms & (bit - 1)));
      Monomial x = m;
      x.forms = static_cast<std::uint16_t>(m.forms & ~bit);
      ++x.fiber[static_cast<std::size_t>(k)];
      r.add(x, (before % 2 ? Rational(-c) : c) / pq);
    }
  }
  return r;
}

// Fiber- and form-free part.
inline FormSection central_projection(const FormSection& a) {
  FormSection r(a.dim_n(), a.trunc());
  for (const auto& [m, c] : a.terms())
    if (m.fiber_degree() == 0 && m.forms == 0) r.add(m, c);
  return r;
}

// Base exterior derivative dz^i d/dz^i, with dz^i placed in front.
inline FormSection exterior_d(const FormSection& a) {
  FormSection r(a.dim_n(), a.trunc());
  for (int i = 0; i < a.vars(); ++i) r += detail::wedge_front(d_base(a, i), i);
  return r;
}

// Gamma~ = 1/2 Gamma_{mkl} Z^m Z^k dz^l, so nabla = d + ad(Gamma~ / nu).
inline FormSection connection_form(const SymplecticConnection& g, const SymplecticFrame& frame, int N) {
  FormSection t(frame.dim_n(), N);
  const int v = frame.vars();
  for (int m = 0; m < v; ++m)
    for (int k = 0; k < v; ++k)
      for (int l = 0; l < v; ++l) {
        const auto& c = g.lowered(m, k, l);
        if (sgn(c) == 0) continue;
        Monomial x;
        ++x.fiber[static_cast<std::size_t>(m)];
        ++x.fiber[static_cast<std::size_t>(k)];
        x.forms = static_cast<std::uint16_t>(1u << l);
        t.add(x, c / 2);
      }
  return t;
}

inline FormSection nabla_symp(const FormSection& a, const SymplecticConnection& g, const SymplecticFrame& frame) {
  detail::check_form_degree(a, kMaxFormDegree - 1, "nabla_symp");
  FormSection r = exterior_d(a);
  if (!g.is_zero()) r += ad_nu(connection_form(g, frame, a.trunc()), a, frame, a.trunc());
  return r;
}

inline FormSection nabla_symp(const FormSection& a, const FedosovState& s) { return nabla_symp(a, s.gamma, s.frame); }

// Curvature 2-form R~ = d Gamma~ + (1/2nu)[Gamma~, Gamma~], with nabla^2 = ad(R~ / nu).
inline FormSection curvature_of(const SymplecticConnection& g, const SymplecticFrame& frame, int N) {
  const FormSection G = connection_form(g, frame, N);
  return exterior_d(G) + ad_nu(G, G, frame, N) * Rational(1, 2);
}

namespace detail {

inline void check_curvature(const FormSection& R) {
  for (const auto& [m, c] : R.terms()) {
    if (m.form_degree() != 2) throw DomainError("curvature must be a 2-form");
    if (m.weight() < 2) throw DomainError("curvature terms need d-degree >= 2 so that deg r >= 3");
  }
}

// R + nabla r + (1/2nu)[r, r] at truncation N.
inline FormSection fedosov_rhs(const FedosovState& s, const FormSection& r, int N) {
  FormSection x = s.curvature.with_trunc(N);
  x += nabla_symp(r, s).with_trunc(N);
  if (!r.is_zero()) x += ad_nu(r, r, s.frame, N) * Rational(1, 2);
  return x;
}

}  // namespace detail

// r = delta^{-1}(R + nabla r + (1/2nu)[r, r]) solved degree by degree; every pass fixes one more d-degree.
inline FormSection fedosov_recursion(FedosovState& s) {
  detail::check_curvature(s.curvature);
  const int N = s.trunc_N;
  FormSection r(s.frame.dim_n(), N);
  for (int pass = 0; pass <= N; ++pass) {
    FormSection next = delta_inv(detail::fedosov_rhs(s, r, N), s.frame);
    if (next == r) break;
    r = std::move(next);
  }
  s.r = r;
  return r;
}

// delta r - R - nabla r - (1/2nu)[r, r]; known exactly through d-degree trunc_N - 1.
inline FormSection flatness_defect(const FedosovState& s) {
  const int M = std::max(0, s.trunc_N - 1);
  FormSection r = s.r.with_trunc(s.trunc_N);
  return delta(r, s.frame).with_trunc(M) - detail::fedosov_rhs(s, r, M);
}

// D a = nabla a - delta a + (1/nu)[r, a].
inline FormSection fedosov_D(const FormSection& a, const FedosovState& s) {
  FormSection out = nabla_symp(a, s) - delta(a, s.frame);
  if (!s.r.is_zero()) out += ad_nu(s.r, a, s.frame, a.trunc());
  return out;
}

// D a known exactly through d-degree trunc - 1.
inline FormSection flat_defect_of(const FormSection& a, const FedosovState& s) {
  return fedosov_D(a, s).with_trunc(std::max(0, a.trunc() - 1));
}

// The parallel section with Z = 0 part f: sigma = f + delta^{-1}(nabla sigma + (1/nu)[r, sigma]).
inline FormSection flat_section(const BasePolynomial& f, const FedosovState& s) {
  require_base_only(f, "flat_section argument");
  if (f.dim_n() != s.frame.dim_n()) throw DimensionMismatch("dim_n mismatch");
  if (!flatness_defect(s).is_zero()) throw DomainError("Fedosov connection is not flat; run fedosov_recursion first");
  const int N = s.trunc_N;
  const FormSection f0 = f.with_trunc(N);
  FormSection sigma = f0;
  for (int pass = 0; pass <= N + 1; ++pass) {
    FormSection x = nabla_symp(sigma, s);
    if (!s.r.is_zero()) x += ad_nu(s.r, sigma, s.frame, N);
    FormSection next = f0 + delta_inv(x, s.frame);
    if (next == sigma) break;
    sigma = std::move(next);
  }
  return sigma;
}

// f * g = sigma(sigma^{-1}(f) o sigma^{-1}(g)), sigma the Z = 0 restriction.
inline BasePolynomial fedosov_star(const BasePolynomial& f, const BasePolynomial& g, const FedosovState& s) {
  auto prod = moyal_product(flat_section(f, s), flat_section(g, s), s.frame);
  return fiber_zero_part(prod);
}

}  // namespace starforge
