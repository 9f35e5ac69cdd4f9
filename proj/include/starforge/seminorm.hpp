#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include "starforge/rational.hpp"
#include "starforge/series.hpp"
#include "starforge/weyl_functions.hpp"

namespace starforge {

// Axis-aligned box in the base variables.
struct Box {
  std::vector<Rational> lo;
  std::vector<Rational> hi;

  static Box cube(int vars, const Rational& lo, const Rational& hi) {
    return Box{std::vector<Rational>(static_cast<std::size_t>(vars), lo),
               std::vector<Rational>(static_cast<std::size_t>(vars), hi)};
  }
};

inline constexpr int kDefaultGrid = 33;

namespace detail {

inline void for_each_multi_index(int vars, int max_order, const std::function<void(const MultiIndex&)>& fn) {
  MultiIndex a{};
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == vars) {
      fn(a);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      a[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(k);
      rec(i + 1, left - k);
    }
    a[static_cast<std::size_t>(i)] = 0;
  };
  rec(0, max_order);
}

// max over the grid of |p|, p a nu-free base polynomial.
inline Rational grid_sup(const WeylSeries& p, const Box& K, int grid) {
  const int v = p.vars();
  if (p.is_zero()) return 0;
  std::vector<std::vector<std::vector<Rational>>> pw(static_cast<std::size_t>(v));
  int maxdeg = 0;
  for (const auto& [m, c] : p.terms()) maxdeg = std::max(maxdeg, static_cast<int>(*std::max_element(m.base.begin(), m.base.end())));
  for (int i = 0; i < v; ++i) {
    const auto u = static_cast<std::size_t>(i);
    for (int g = 0; g < grid; ++g) {
      Rational x = grid == 1 ? K.lo[u] : K.lo[u] + (K.hi[u] - K.lo[u]) * Rational(g, grid - 1);
      std::vector<Rational> powers{Rational(1)};
      for (int e = 1; e <= maxdeg; ++e) powers.push_back(powers.back() * x);
      pw[u].push_back(std::move(powers));
    }
  }
  Rational best = 0;
  std::vector<int> idx(static_cast<std::size_t>(v), 0);
  while (true) {
    Rational val = 0;
    for (const auto& [m, c] : p.terms()) {
      Rational t = c;
      for (int i = 0; i < v; ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (m.base[u]) t *= pw[u][static_cast<std::size_t>(idx[u])][m.base[u]];
      }
      val += t;
    }
    best = std::max(best, abs(val));
    int i = 0;
    for (; i < v; ++i) {
      if (++idx[static_cast<std::size_t>(i)] < grid) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
    if (i == v) break;
  }
  return best;
}

}  // namespace detail

// ||sum nu^l f_l||_{i,K} = sum_{|alpha| + 2l <= i} sup_K |d^alpha f_l|, sup taken over a uniform grid.
inline Rational seminorm(const WeylSeries& f, int i, const Box& K, int grid = kDefaultGrid) {
  require_base_only(f, "seminorm argument");
  const int v = f.vars();
  if (static_cast<int>(K.lo.size()) != v || static_cast<int>(K.hi.size()) != v)
    throw DimensionMismatch("box dimension differs from 2n");
  for (int k = 0; k < v; ++k)
    if (K.lo[static_cast<std::size_t>(k)] > K.hi[static_cast<std::size_t>(k)]) throw DomainError("empty box");
  if (grid < 1) throw DomainError("grid must have at least one point per axis");
  if (i < 0) throw DomainError("seminorm index must be non-negative");
  Rational total = 0;
  for (int l = 0; 2 * l <= i; ++l) {
    WeylSeries fl = nu_coefficient(f, l);
    if (fl.is_zero()) continue;
    detail::for_each_multi_index(v, i - 2 * l, [&](const MultiIndex& a) {
      WeylSeries d = fl;
      for (int k = 0; k < v && !d.is_zero(); ++k)
        for (int r = 0; r < a[static_cast<std::size_t>(k)]; ++r) d = d_base(d, k);
      total += detail::grid_sup(d, K, grid);
    });
  }
  return total;
}

// sum over 2k + 2l + 2|alpha| + 2|beta| + |gamma| + |delta| <= i of
// (1/2)^{|alpha+beta|} / (alpha! beta!) * sum_{zeta <= gamma, eta <= delta} C(gamma,zeta) C(delta,eta),
// with alpha, beta, gamma, delta multi-indices over n variables.
inline Rational quasi_mult_constant(int i, const SymplecticFrame& frame) {
  if (i < 0) throw DomainError("index must be non-negative");
  const int n = frame.dim_n();
  // Collect sum of (1/2)^{|a|}/a! by order, and the count of multi-indices by order.
  std::vector<Rational> inv_fact_by_order(static_cast<std::size_t>(i + 1), 0);
  std::vector<Rational> count_by_order(static_cast<std::size_t>(i + 1), 0);
  detail::for_each_multi_index(n, i, [&](const MultiIndex& a) {
    Rational f = 1;
    for (int k = 0; k < n; ++k) f *= factorial(a[static_cast<std::size_t>(k)]);
    const int o = order(a);
    inv_fact_by_order[static_cast<std::size_t>(o)] += pow(Rational(1, 2), o) / f;
    count_by_order[static_cast<std::size_t>(o)] += 1;
  });
  Rational total = 0;
  for (int k = 0; 2 * k <= i; ++k)
    for (int l = 0; 2 * k + 2 * l <= i; ++l)
      for (int a = 0; 2 * (k + l + a) <= i; ++a)
        for (int b = 0; 2 * (k + l + a + b) <= i; ++b)
          for (int g = 0; 2 * (k + l + a + b) + g <= i; ++g)
            for (int d = 0; 2 * (k + l + a + b) + g + d <= i; ++d)
              total += inv_fact_by_order[static_cast<std::size_t>(a)] * inv_fact_by_order[static_cast<std::size_t>(b)] *
                       count_by_order[static_cast<std::size_t>(g)] * count_by_order[static_cast<std::size_t>(d)] *
                       pow(Rational(2), g + d);
  return total;
}

}  // namespace starforge
