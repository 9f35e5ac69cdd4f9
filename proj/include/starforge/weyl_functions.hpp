#pragma once

#include <cstdint>
#include <string>

#include "starforge/moyal.hpp"
#include "starforge/series.hpp"

namespace starforge {

// Polynomials in the base variables z (and nu); no fiber variables or forms.
using BasePolynomial = WeylSeries;
// Sections of the Weyl bundle over the chart.
using Section = WeylSeries;

inline void require_base_only(const WeylSeries& f, const char* what) {
  if (!is_base_only(f)) throw DomainError(std::string(what) + " must not contain fiber variables or forms");
}

inline bool is_even_in_nu(const WeylSeries& f) {
  for (const auto& [m, c] : f.terms())
    if (m.nu % 2) return false;
  return true;
}

// f(z + Z): Taylor shift of each base monomial, truncated to d-degree <= trunc.
inline Section weyl_continuation(const BasePolynomial& f, const SymplecticFrame& frame) {
  require_base_only(f, "weyl_continuation input");
  if (f.dim_n() != frame.dim_n()) throw DimensionMismatch("dim_n mismatch");
  const int vars = frame.vars();
  Section out(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms()) {
    // Expand prod_i (z_i + Z_i)^{b_i} by iterating over the split k_i <= b_i.
    MultiIndex k{};
    while (true) {
      Monomial t;
      t.nu = m.nu;
      Rational coeff = c;
      for (int i = 0; i < vars; ++i) {
        const auto u = static_cast<std::size_t>(i);
        t.fiber[u] = k[u];
        t.base[u] = static_cast<std::uint8_t>(m.base[u] - k[u]);
        coeff *= binomial(m.base[u], k[u]);
      }
      out.add(t, coeff);
      int i = 0;
      for (; i < vars; ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (k[u] < m.base[u]) {
          ++k[u];
          break;
        }
        k[u] = 0;
      }
      if (i == vars) break;
    }
  }
  return out;
}

// Inverse of the continuation on Weyl functions: set Z = 0, then check the shape.
inline BasePolynomial weyl_inverse(const Section& s, const SymplecticFrame& frame) {
  BasePolynomial r = fiber_zero_part(s);
  for (const auto& [m, c] : r.terms())
    if (m.forms) throw DomainError("weyl_inverse: section carries forms");
  if (weyl_continuation(r, frame) != s)
    throw DomainError("internal error: product of Weyl functions failed the parallel-section shape check");
  return r;
}

// f * g = #^{-1}(#f * #g) on the flat chart.
inline BasePolynomial recaptured_star(const BasePolynomial& f, const BasePolynomial& g,
                                      const SymplecticFrame& frame) {
  require_base_only(f, "recaptured_star operand");
  require_base_only(g, "recaptured_star operand");
  return weyl_inverse(moyal_product(weyl_continuation(f, frame), weyl_continuation(g, frame), frame), frame);
}

// Lambda^{ij} d_i f d_j g on base variables.
inline BasePolynomial poisson_bracket(const BasePolynomial& f, const BasePolynomial& g,
                                      const SymplecticFrame& frame) {
  BasePolynomial out(f.dim_n(), std::min(f.trunc(), g.trunc()));
  for (int i = 0; i < frame.vars(); ++i) {
    auto dfi = d_base(f, i);
    if (dfi.is_zero()) continue;
    for (int j = 0; j < frame.vars(); ++j)
      if (frame.lambda(i, j) != 0) out += pointwise_product(dfi, d_base(g, j)) * frame.lambda(i, j);
  }
  return out;
}

// Coefficient of nu^l, as a nu-free polynomial.
inline WeylSeries nu_coefficient(const WeylSeries& f, int l) {
  WeylSeries r(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms())
    if (m.nu == l) {
      Monomial x = m;
      x.nu = 0;
      r.add(x, c);
    }
  return r;
}

}  // namespace starforge
