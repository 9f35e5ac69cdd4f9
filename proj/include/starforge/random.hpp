#pragma once

#include <cstdint>
#include <random>

#include "starforge/matrix.hpp"
#include "starforge/rational.hpp"
#include "starforge/series.hpp"

namespace starforge {

// Seeded generator with a portable integer mapping, so batteries are byte-stable across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  int uniform(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(eng_() % span);
  }

  bool coin() { return (eng_() & 1u) != 0; }

  // Nonzero rational with |numerator| <= num, denominator in 1..den.
  Rational nonzero_rational(int num = 5, int den = 4) {
    int p = uniform(1, num);
    if (coin()) p = -p;
    return rat(p, uniform(1, den));
  }

  Rational rational(int num = 5, int den = 4) {
    int p = uniform(-num, num);
    return rat(p, uniform(1, den));
  }

 private:
  std::mt19937_64 eng_;
};

struct SeriesShape {
  int terms = 5;
  int max_fiber = 3;
  int max_nu = 1;
  int max_base = 0;
};

// Random series in n fiber (and optionally base) variables; monomials above trunc are dropped.
inline WeylSeries random_series(Rng& rng, int n, int N, const SeriesShape& shape) {
  WeylSeries s(n, N);
  for (int t = 0; t < shape.terms; ++t) {
    Monomial m;
    m.nu = rng.uniform(0, shape.max_nu);
    int fd = rng.uniform(0, shape.max_fiber);
    for (int k = 0; k < fd; ++k) ++m.fiber[static_cast<std::size_t>(rng.uniform(0, 2 * n - 1))];
    int bd = rng.uniform(0, shape.max_base);
    for (int k = 0; k < bd; ++k) ++m.base[static_cast<std::size_t>(rng.uniform(0, 2 * n - 1))];
    s.add(m, rng.nonzero_rational());
  }
  return s;
}

// Random polynomial in base variables only, with total degree <= max_deg.
inline WeylSeries random_base_poly(Rng& rng, int n, int N, int terms, int max_deg) {
  WeylSeries s(n, N);
  for (int t = 0; t < terms; ++t) {
    Monomial m;
    int d = rng.uniform(0, max_deg);
    for (int k = 0; k < d; ++k) ++m.base[static_cast<std::size_t>(rng.uniform(0, 2 * n - 1))];
    s.add(m, rng.nonzero_rational());
  }
  return s;
}

// Homogeneous base polynomial of exact degree d with every monomial of that degree present at random.
inline WeylSeries random_homogeneous_base(Rng& rng, int n, int N, int d, int terms) {
  WeylSeries s(n, N);
  for (int t = 0; t < terms; ++t) {
    Monomial m;
    for (int k = 0; k < d; ++k) ++m.base[static_cast<std::size_t>(rng.uniform(0, 2 * n - 1))];
    s.add(m, rng.nonzero_rational());
  }
  return s;
}

inline RatMatrix random_matrix(Rng& rng, int rows, int cols, int num = 3, int den = 2) {
  RatMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.rational(num, den);
  return m;
}

inline RatMatrix random_symmetric(Rng& rng, int size, int num = 3, int den = 2) {
  RatMatrix m(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = i; j < size; ++j) m(i, j) = m(j, i) = rng.rational(num, den);
  return m;
}

// Product of random block shears [[I, S], [0, I]] and [[I, 0], [T, I]] with S, T symmetric;
// symplectic for both built-in conventions.
inline RatMatrix random_symplectic(Rng& rng, int n, int factors = 3) {
  RatMatrix A = RatMatrix::identity(2 * n);
  for (int f = 0; f < factors; ++f) {
    RatMatrix S = random_symmetric(rng, n, 2, 2);
    RatMatrix M = RatMatrix::identity(2 * n);
    const bool upper = f % 2 == 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (upper)
          M(i, n + j) = S(i, j);
        else
          M(n + i, j) = S(i, j);
      }
    A = A * M;
  }
  return A;
}

// Fiber polynomial whose monomials all have d-degree in [dmin, dmax] and at least one fiber variable.
inline WeylSeries random_exponent(Rng& rng, int n, int N, int dmin, int dmax, int terms) {
  WeylSeries s(n, N);
  for (int t = 0; t < terms; ++t) {
    const int d = rng.uniform(dmin, dmax);
    Monomial m;
    m.nu = rng.uniform(0, (d - 1) / 2);
    for (int k = 0; k < d - 2 * m.nu; ++k) ++m.fiber[static_cast<std::size_t>(rng.uniform(0, 2 * n - 1))];
    s.add(m, rng.nonzero_rational(3, 3));
  }
  return s;
}

}  // namespace starforge
