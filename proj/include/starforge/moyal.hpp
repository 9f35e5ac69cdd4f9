#pragma once

#include <algorithm>
#include <cstdint>

#include "starforge/frame.hpp"
#include "starforge/series.hpp"

namespace starforge {

namespace detail {

inline long falling(int p, int a) {
  long r = 1;
  for (int i = 0; i < a; ++i) r *= p - i;
  return r;
}

inline bool fits(const MultiIndex& part, const MultiIndex& whole, int vars) {
  for (int i = 0; i < vars; ++i)
    if (part[static_cast<std::size_t>(i)] > whole[static_cast<std::size_t>(i)]) return false;
  return true;
}

// out += sign * f * g with the fiberwise Moyal product, keeping d-degree <= out.trunc().
// Inputs may carry any truncation; the product is d-graded so only pairs within budget are formed.
inline void moyal_accumulate(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame,
                             WeylSeries& out, const Rational& scale = 1) {
  const int vars = frame.vars();
  const int budget = out.trunc();
  for (const auto& [a, ca] : f.terms()) {
    const int wa = a.weight();
    if (wa > budget) continue;
    for (const auto& [b, cb] : g.terms()) {
      if (wa + b.weight() > budget) continue;
      const int sign = wedge_sign(a.forms, b.forms);
      if (sign == 0) continue;
      const Rational base = scale * sign * ca * cb;
      const int kmax = std::min(a.fiber_degree(), b.fiber_degree());
      Rational half_pow = 1;
      for (int k = 0; k <= kmax; ++k) {
        if (k > 0) half_pow /= 2;
        for (const auto& t : frame.bidiff(k)) {
          if (!fits(t.alpha, a.fiber, vars) || !fits(t.beta, b.fiber, vars)) continue;
          long mult = 1;
          Monomial m;
          m.nu = a.nu + b.nu + k;
          for (int i = 0; i < vars; ++i) {
            const auto u = static_cast<std::size_t>(i);
            mult *= falling(a.fiber[u], t.alpha[u]) * falling(b.fiber[u], t.beta[u]);
            m.fiber[u] = static_cast<std::uint8_t>(a.fiber[u] - t.alpha[u] + b.fiber[u] - t.beta[u]);
            m.base[u] = static_cast<std::uint8_t>(a.base[u] + b.base[u]);
          }
          m.forms = a.forms | b.forms;
          out.add(m, base * half_pow * t.coeff * mult);
        }
      }
    }
  }
}

inline void check_same(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame) {
  if (f.dim_n() != g.dim_n() || f.dim_n() != frame.dim_n()) throw DimensionMismatch("dim_n mismatch");
  if (f.trunc() != g.trunc()) throw TruncationMismatch("trunc_N mismatch");
}

inline void check_dims(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame) {
  if (f.dim_n() != g.dim_n() || f.dim_n() != frame.dim_n()) throw DimensionMismatch("dim_n mismatch");
}

inline void split_parity(const WeylSeries& f, WeylSeries& even, WeylSeries& odd) {
  even = WeylSeries(f.dim_n(), f.trunc());
  odd = WeylSeries(f.dim_n(), f.trunc());
  for (const auto& [m, c] : f.terms()) (m.form_degree() % 2 ? odd : even).add(m, c);
}

}  // namespace detail

// Product with an explicit output truncation; operands may carry different truncations.
inline WeylSeries moyal_product_to(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame,
                                   int out_N) {
  detail::check_dims(f, g, frame);
  WeylSeries out(f.dim_n(), out_N);
  detail::moyal_accumulate(f, g, frame, out);
  return out;
}

inline WeylSeries moyal_product(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame) {
  detail::check_same(f, g, frame);
  return moyal_product_to(f, g, frame, f.trunc());
}

// Graded commutator ab - (-1)^{|a||b|} ba, |.| the form degree.
inline WeylSeries star_commutator_to(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame,
                                     int out_N) {
  detail::check_dims(f, g, frame);
  WeylSeries out(f.dim_n(), out_N);
  detail::moyal_accumulate(f, g, frame, out);
  WeylSeries fe, fo, ge, go;
  detail::split_parity(f, fe, fo);
  detail::split_parity(g, ge, go);
  detail::moyal_accumulate(g, fe, frame, out, -1);
  detail::moyal_accumulate(ge, fo, frame, out, -1);
  detail::moyal_accumulate(go, fo, frame, out, 1);
  return out;
}

inline WeylSeries star_commutator(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame) {
  detail::check_same(f, g, frame);
  return star_commutator_to(f, g, frame, f.trunc());
}

// (1/nu)[f, g], computed two d-degrees higher so the division loses nothing up to out_N.
inline WeylSeries ad_nu(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame, int out_N) {
  return shift_nu(star_commutator_to(f, g, frame, out_N + 2), -1, out_N);
}

inline WeylSeries ad_nu(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame) {
  return ad_nu(f, g, frame, g.trunc());
}

inline WeylSeries star_power(const WeylSeries& f, int k, const SymplecticFrame& frame) {
  WeylSeries r = WeylSeries::constant(f.dim_n(), f.trunc(), 1);
  for (int i = 0; i < k; ++i) r = moyal_product(r, f, frame);
  return r;
}

}  // namespace starforge
