#pragma once

#include <gmpxx.h>

#include <string>

#include "starforge/error.hpp"

namespace starforge {

using Rational = mpq_class;

inline Rational rat(long p, long q = 1) {
  if (q == 0) throw DomainError("zero denominator");
  Rational r{mpz_class(p), mpz_class(q)};
  r.canonicalize();
  return r;
}

inline std::string to_string(const Rational& r) { return r.get_str(); }

inline Rational parse_rational(const std::string& s) {
  Rational r;
  if (r.set_str(s, 10) != 0 || r.get_den() == 0) throw DomainError("bad rational literal '" + s + "'");
  r.canonicalize();
  return r;
}

inline Rational pow(const Rational& r, int k) {
  Rational out = 1;
  for (int i = 0; i < k; ++i) out *= r;
  return out;
}

inline Rational factorial(int k) {
  mpz_class f;
  mpz_fac_ui(f.get_mpz_t(), static_cast<unsigned long>(k));
  return Rational(f);
}

inline Rational binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  mpz_class b;
  mpz_bin_uiui(b.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(k));
  return Rational(b);
}

inline double to_double(const Rational& r) { return r.get_d(); }

inline Rational abs(const Rational& r) { return r < 0 ? Rational(-r) : r; }

}  // namespace starforge
