#pragma once

// Independent reference implementations used only by the tests.

#include <functional>
#include <vector>

#include "starforge/frame.hpp"
#include "starforge/series.hpp"

namespace oracle {

using starforge::Rational;
using starforge::SymplecticFrame;
using starforge::WeylSeries;

// Moyal product as the literal sum over ordered index tuples (i1 j1 ... ik jk),
// sum_k (nu/2)^k / k! Lambda^{i1 j1}...Lambda^{ik jk} d_{i1..ik} f d_{j1..jk} g.
inline WeylSeries moyal(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame) {
  const int v = frame.vars();
  const int N = std::min(f.trunc(), g.trunc());
  WeylSeries out(f.dim_n(), N);
  WeylSeries nu_half = WeylSeries::nu(f.dim_n(), N) * Rational(1, 2);
  WeylSeries scale = WeylSeries::constant(f.dim_n(), N, 1);
  for (int k = 0;; ++k) {
    bool any = false;
    std::vector<int> idx(static_cast<std::size_t>(2 * k), 0);
    std::function<void(int, WeylSeries, WeylSeries, Rational)> rec = [&](int depth, WeylSeries df, WeylSeries dg,
                                                                         Rational lam) {
      if (df.is_zero() || dg.is_zero() || lam == 0) return;
      if (depth == k) {
        any = true;
        out += starforge::pointwise_product(starforge::pointwise_product(scale, df), dg) * lam;
        return;
      }
      for (int i = 0; i < v; ++i)
        for (int j = 0; j < v; ++j)
          rec(depth + 1, starforge::d_fiber(df, i), starforge::d_fiber(dg, j), lam * frame.lambda(i, j));
    };
    rec(0, f, g, starforge::factorial(k) == 0 ? Rational(0) : 1 / starforge::factorial(k));
    if (!any) break;
    scale = starforge::pointwise_product(scale, nu_half);
  }
  return out;
}

// Poisson bracket {f,g} = Lambda^{ij} d_i f d_j g in base variables.
inline WeylSeries poisson(const WeylSeries& f, const WeylSeries& g, const SymplecticFrame& frame) {
  WeylSeries out(f.dim_n(), std::min(f.trunc(), g.trunc()));
  for (int i = 0; i < frame.vars(); ++i)
    for (int j = 0; j < frame.vars(); ++j)
      if (frame.lambda(i, j) != 0)
        out += starforge::pointwise_product(starforge::d_base(f, i), starforge::d_base(g, j)) * frame.lambda(i, j);
  return out;
}

}  // namespace oracle

#include <cmath>
#include <map>
#include <utility>

#include "starforge/moyal.hpp"

namespace oracle {

using starforge::Monomial;
using Vec = std::map<Monomial, double>;

inline Vec to_vec(const WeylSeries& s) {
  Vec v;
  for (const auto& [m, c] : s.terms()) v[m] = c.get_d();
  return v;
}

inline void axpy(Vec& y, double a, const Vec& x) {
  for (const auto& [m, c] : x) y[m] += a * c;
}

// Double-precision Lie algebra (W, (1/nu)[.,.]) through structure constants on monomials.
class FloatLie {
 public:
  FloatLie(SymplecticFrame frame, int n, int T) : frame_(std::move(frame)), n_(n), T_(T) {}

  Vec bracket(const Vec& a, const Vec& b) {
    Vec out;
    for (const auto& [ma, ca] : a) {
      if (ca == 0 || (ma.fiber_degree() == 0)) continue;
      for (const auto& [mb, cb] : b) {
        if (cb == 0 || mb.fiber_degree() == 0) continue;
        axpy(out, ca * cb, table(ma, mb));
      }
    }
    return out;
  }

 private:
  const Vec& table(const Monomial& a, const Monomial& b) {
    auto key = std::make_pair(a, b);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto ea = WeylSeries::term(n_, T_, a, 1);
    auto eb = WeylSeries::term(n_, T_, b, 1);
    return cache_.emplace(key, to_vec(starforge::ad_nu(ea, eb, frame_, T_))).first->second;
  }

  SymplecticFrame frame_;
  int n_;
  int T_;
  std::map<std::pair<Monomial, Monomial>, Vec> cache_;
};

// Y(1) for Y' = sum_k B_k/k! ad_Y^k X(t), Y(0) = 0 (B_1 = -1/2), so that e^{Y(t+dt)} = e^{X(t)dt} e^{Y(t)}.
// X(t) = sum_j t^j X_j. Classical RK4.
inline Vec exponent_ode(const std::vector<WeylSeries>& X, const SymplecticFrame& frame, int steps, int kmax) {
  const int n = X.front().dim_n();
  const int T = X.front().trunc();
  FloatLie lie(frame, n, T);
  std::vector<Vec> Xv;
  for (const auto& x : X) Xv.push_back(to_vec(x));
  const double bern[] = {1.0, -0.5, 1.0 / 6, 0.0, -1.0 / 30, 0.0, 1.0 / 42, 0.0, -1.0 / 30, 0.0, 5.0 / 66};
  auto rhs = [&](double t, const Vec& Y) {
    Vec x;
    double p = 1;
    for (const auto& xj : Xv) {
      axpy(x, p, xj);
      p *= t;
    }
    Vec out;
    Vec term = x;
    double fact = 1;
    for (int k = 0; k <= kmax && k <= 10; ++k) {
      if (k > 0) {
        term = lie.bracket(Y, term);
        fact *= k;
      }
      if (bern[k] != 0) axpy(out, bern[k] / fact, term);
    }
    return out;
  };
  Vec Y;
  const double h = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    const double t = s * h;
    Vec k1 = rhs(t, Y);
    Vec y2 = Y;
    axpy(y2, h / 2, k1);
    Vec k2 = rhs(t + h / 2, y2);
    Vec y3 = Y;
    axpy(y3, h / 2, k2);
    Vec k3 = rhs(t + h / 2, y3);
    Vec y4 = Y;
    axpy(y4, h, k3);
    Vec k4 = rhs(t + h, y4);
    axpy(Y, h / 6, k1);
    axpy(Y, h / 3, k2);
    axpy(Y, h / 3, k3);
    axpy(Y, h / 6, k4);
  }
  return Y;
}

inline double max_diff(const Vec& a, const WeylSeries& b) {
  Vec d = a;
  for (const auto& [m, c] : b.terms()) d[m] -= c.get_d();
  double mx = 0;
  for (const auto& [m, c] : d) mx = std::max(mx, std::abs(c));
  return mx;
}

}  // namespace oracle
