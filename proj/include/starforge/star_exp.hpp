#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "starforge/error.hpp"
#include "starforge/frame.hpp"
#include "starforge/matrix.hpp"
#include "starforge/moyal.hpp"
#include "starforge/rational.hpp"
#include "starforge/series.hpp"

namespace starforge {

// A[Z] = tZ A Z for a symmetric 2n x 2n matrix A.
struct QuadraticForm {
  RatMatrix A;

  explicit QuadraticForm(RatMatrix m) : A(std::move(m)) {
    if (!A.is_symmetric()) throw DomainError("quadratic form matrix must be symmetric");
  }

  int vars() const { return A.rows(); }

  WeylSeries to_series(int n, int N) const {
    if (A.rows() != 2 * n) throw DimensionMismatch("quadratic form size differs from 2n");
    WeylSeries s(n, N);
    for (int i = 0; i < 2 * n; ++i)
      for (int j = 0; j < 2 * n; ++j) {
        if (sgn(A(i, j)) == 0) continue;
        Monomial m;
        ++m.fiber[static_cast<std::size_t>(i)];
        ++m.fiber[static_cast<std::size_t>(j)];
        s.add(m, A(i, j));
      }
    return s;
  }
};

// F(t) = sum_k t^k nu^{-k} c_k. The nu^k scaling keeps every coefficient polynomial; c_k is
// homogeneous of d-degree 2k.
struct ParamSeries {
  int K = 0;
  std::vector<WeylSeries> coeffs;

  bool operator==(const ParamSeries& o) const { return K == o.K && coeffs == o.coeffs; }
};

using ScalarSeries = std::vector<Rational>;

// Truncated power series in t with matrix coefficients.
struct MatrixSeries {
  std::vector<RatMatrix> coeffs;

  int order() const { return static_cast<int>(coeffs.size()) - 1; }
  int size() const { return coeffs.front().rows(); }

  static MatrixSeries constant(const RatMatrix& m, int K) {
    MatrixSeries s;
    s.coeffs.assign(static_cast<std::size_t>(K + 1), RatMatrix(m.rows(), m.cols()));
    s.coeffs[0] = m;
    return s;
  }

  MatrixSeries operator+(const MatrixSeries& o) const {
    check(o);
    MatrixSeries r = *this;
    for (std::size_t k = 0; k < coeffs.size(); ++k) r.coeffs[k] = r.coeffs[k] + o.coeffs[k];
    return r;
  }

  MatrixSeries operator-(const MatrixSeries& o) const {
    check(o);
    MatrixSeries r = *this;
    for (std::size_t k = 0; k < coeffs.size(); ++k) r.coeffs[k] = r.coeffs[k] - o.coeffs[k];
    return r;
  }

  MatrixSeries operator*(const MatrixSeries& o) const {
    check(o);
    MatrixSeries r = constant(RatMatrix(size(), size()), order());
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      if (coeffs[i].is_zero()) continue;
      for (std::size_t j = 0; i + j < coeffs.size(); ++j) r.coeffs[i + j] = r.coeffs[i + j] + coeffs[i] * o.coeffs[j];
    }
    return r;
  }

  MatrixSeries operator*(const Rational& s) const {
    MatrixSeries r = *this;
    for (auto& c : r.coeffs) c = c * s;
    return r;
  }

  // Requires an invertible constant term.
  MatrixSeries inverse() const {
    const RatMatrix c0 = coeffs[0].inverse();
    MatrixSeries r = constant(c0, order());
    for (int k = 1; k <= order(); ++k) {
      RatMatrix acc(size(), size());
      for (int j = 1; j <= k; ++j) acc = acc + coeffs[static_cast<std::size_t>(j)] * r.coeffs[static_cast<std::size_t>(k - j)];
      r.coeffs[static_cast<std::size_t>(k)] = -(c0 * acc);
    }
    return r;
  }

  ScalarSeries trace() const {
    ScalarSeries r;
    for (const auto& c : coeffs) r.push_back(c.trace());
    return r;
  }

 private:
  void check(const MatrixSeries& o) const {
    if (coeffs.size() != o.coeffs.size()) throw TruncationMismatch("matrix series orders differ");
    if (size() != o.size()) throw DimensionMismatch("matrix series sizes differ");
  }
};

namespace series {

inline ScalarSeries mul(const ScalarSeries& a, const ScalarSeries& b) {
  ScalarSeries r(a.size(), 0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; i + j < a.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

// exp of a series without constant term.
inline ScalarSeries exp(const ScalarSeries& a) {
  if (sgn(a[0]) != 0) throw DomainError("exp series needs a vanishing constant term");
  const std::size_t K = a.size() - 1;
  // e' = a' e, solved order by order.
  ScalarSeries e(a.size(), 0);
  e[0] = 1;
  for (std::size_t k = 1; k <= K; ++k) {
    Rational acc = 0;
    for (std::size_t j = 1; j <= k; ++j) acc += Rational(static_cast<long>(j)) * a[j] * e[k - j];
    e[k] = acc / Rational(static_cast<long>(k));
  }
  return e;
}

// log(I + X) for X without constant term.
inline MatrixSeries log_one_plus(const MatrixSeries& X) {
  if (!X.coeffs[0].is_zero()) throw DomainError("log series needs a vanishing constant term");
  const int K = X.order();
  MatrixSeries r = MatrixSeries::constant(RatMatrix(X.size(), X.size()), K);
  MatrixSeries p = X;
  for (int k = 1; k <= K; ++k) {
    r = r + p * Rational(k % 2 ? 1 : -1, k);
    p = p * X;
  }
  return r;
}

// cosh(ta) and sinh(ta) through t^K.
inline MatrixSeries cosh_t(const RatMatrix& a, int K) {
  MatrixSeries r = MatrixSeries::constant(RatMatrix(a.rows(), a.cols()), K);
  RatMatrix p = RatMatrix::identity(a.rows());
  for (int k = 0; k <= K; ++k) {
    if (k % 2 == 0) r.coeffs[static_cast<std::size_t>(k)] = p * (Rational(1) / factorial(k));
    p = p * a;
  }
  return r;
}

inline MatrixSeries sinh_t(const RatMatrix& a, int K) {
  MatrixSeries r = MatrixSeries::constant(RatMatrix(a.rows(), a.cols()), K);
  RatMatrix p = RatMatrix::identity(a.rows());
  for (int k = 0; k <= K; ++k) {
    if (k % 2 == 1) r.coeffs[static_cast<std::size_t>(k)] = p * (Rational(1) / factorial(k));
    p = p * a;
  }
  return r;
}

}  // namespace series

namespace detail {

inline void check_form(const QuadraticForm& A, const SymplecticFrame& frame, int K) {
  if (K < 0) throw DomainError("t-order K must be non-negative");
  if (A.vars() != frame.vars()) throw DimensionMismatch("quadratic form size differs from 2n");
}

}  // namespace detail

// sum_{k<=K} t^k/k! (A[Z]/mu)^{*k} with mu = -nu.
inline ParamSeries star_exp_taylor(const QuadraticForm& A, int K, const SymplecticFrame& frame) {
  detail::check_form(A, frame, K);
  const int n = frame.dim_n();
  const int N = 2 * K;
  const WeylSeries q = A.to_series(n, N);
  ParamSeries F{K, {}};
  WeylSeries power = WeylSeries::constant(n, N, 1);
  for (int k = 0; k <= K; ++k) {
    F.coeffs.push_back(power * (Rational(k % 2 ? -1 : 1) / factorial(k)));
    if (k < K) power = moyal_product(q, power, frame);
  }
  return F;
}

// Amplitude det^{-1/2}(cosh(ta)) as exp(-tr log(cosh(ta)) / 2), a = Lambda A.
inline ScalarSeries star_exp_amplitude(const QuadraticForm& A, int K, const SymplecticFrame& frame) {
  detail::check_form(A, frame, K);
  const RatMatrix a = frame.lambda() * A.A;
  MatrixSeries c = series::cosh_t(a, K);
  c.coeffs[0] = RatMatrix(a.rows(), a.cols());
  ScalarSeries tr = series::log_one_plus(c).trace();
  for (auto& x : tr) x *= Rational(-1, 2);
  return series::exp(tr);
}

// Phase matrix Q(t) = Lambda^{-1} tanh(ta).
inline MatrixSeries star_exp_phase(const QuadraticForm& A, int K, const SymplecticFrame& frame) {
  detail::check_form(A, frame, K);
  const RatMatrix a = frame.lambda() * A.A;
  MatrixSeries tanh = series::sinh_t(a, K) * series::cosh_t(a, K).inverse();
  return MatrixSeries::constant(frame.omega(), K) * tanh;
}

// g(t) e^{Q(t)[Z]/mu} re-expanded in t.
inline ParamSeries star_exp_closed(const QuadraticForm& A, int K, const SymplecticFrame& frame) {
  detail::check_form(A, frame, K);
  const int n = frame.dim_n();
  const int N = 2 * K;
  const ScalarSeries g = star_exp_amplitude(A, K, frame);
  const MatrixSeries Q = star_exp_phase(A, K, frame);
  // Qz[k] = [t^k] Q(t)[Z].
  std::vector<WeylSeries> Qz;
  for (const auto& m : Q.coeffs) Qz.push_back(QuadraticForm(m).to_series(n, N));
  // powers[j][k] = [t^k] Q(t)[Z]^j; zero for k < j since Q(0) = 0.
  std::vector<std::vector<WeylSeries>> powers(static_cast<std::size_t>(K + 1),
                                              std::vector<WeylSeries>(static_cast<std::size_t>(K + 1), WeylSeries(n, N)));
  powers[0][0] = WeylSeries::constant(n, N, 1);
  for (int j = 1; j <= K; ++j)
    for (int k = j; k <= K; ++k)
      for (int i = 1; i <= k - j + 1; ++i)
        powers[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] +=
            pointwise_product(Qz[static_cast<std::size_t>(i)], powers[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(k - i)]);
  ParamSeries F{K, {}};
  for (int k = 0; k <= K; ++k) {
    // c_k = sum_j sum_i g_i nu^{k-j} (-1)^j / j! [t^{k-i}] Q[Z]^j
    WeylSeries c(n, N);
    for (int j = 0; j <= k; ++j) {
      WeylSeries inner(n, N);
      for (int i = 0; i + j <= k; ++i)
        if (sgn(g[static_cast<std::size_t>(i)]) != 0)
          inner += powers[static_cast<std::size_t>(j)][static_cast<std::size_t>(k - i)] * g[static_cast<std::size_t>(i)];
      if (inner.is_zero()) continue;
      inner *= Rational(j % 2 ? -1 : 1) / factorial(j);
      WeylSeries shifted(n, N);
      for (const auto& [m, v] : inner.terms()) {
        Monomial x = m;
        x.nu += k - j;
        shifted.add(x, v);
      }
      c += shifted;
    }
    F.coeffs.push_back(c);
  }
  return F;
}

// (k+1) c_{k+1} + A[Z] * c_k for k < K; all zero when F solves dF/dt = (A[Z]/mu) * F.
inline std::vector<WeylSeries> evolution_defect(const QuadraticForm& A, const ParamSeries& F, const SymplecticFrame& frame) {
  const int n = frame.dim_n();
  const int N = 2 * F.K;
  const WeylSeries q = A.to_series(n, N);
  std::vector<WeylSeries> out;
  for (int k = 0; k < F.K; ++k) {
    const auto& next = F.coeffs[static_cast<std::size_t>(k + 1)];
    out.push_back(next.with_trunc(N) * Rational(k + 1) + moyal_product(q, F.coeffs[static_cast<std::size_t>(k)].with_trunc(N), frame));
  }
  return out;
}

// C(X) = (1 - X)(1 + X)^{-1}.
inline RatMatrix cayley(const RatMatrix& X) {
  if (!X.square()) throw DimensionMismatch("cayley needs a square matrix");
  const RatMatrix I = RatMatrix::identity(X.rows());
  const RatMatrix P = I + X;
  if (sgn(P.det()) == 0) throw DomainError("1 + X is singular");
  return (I - X) * P.inverse();
}

inline RatMatrix cayley_inv(const RatMatrix& g) { return cayley(g); }

using DMatrix = Eigen::MatrixXd;

inline DMatrix to_eigen(const RatMatrix& m) {
  DMatrix r(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r(i, j) = to_double(m(i, j));
  return r;
}

inline DMatrix cayley(const DMatrix& X) {
  const DMatrix I = DMatrix::Identity(X.rows(), X.cols());
  return (I - X) * (I + X).inverse();
}

struct RiccatiSample {
  double t;
  DMatrix q;
  double g;
};

struct RiccatiPath {
  std::vector<RiccatiSample> samples;
};

// det((e^{at}(1+b) + e^{-at}(1-b)) / 2), whose zero marks the blow-up of the flow.
inline double riccati_denominator_det(const DMatrix& a, const DMatrix& b, double t) {
  const DMatrix I = DMatrix::Identity(a.rows(), a.cols());
  const DMatrix ep = (a * t).exp();
  const DMatrix em = (-a * t).exp();
  return ((ep * (I + b) + em * (I - b)) * 0.5).determinant();
}

// Closed-form q(t) = C^{-1}(e^{-2at} C(b)) and g(t) = det^{-1/2}((e^{at}(1+b) + e^{-at}(1-b)) / 2).
inline RiccatiSample riccati_closed(const DMatrix& a, const DMatrix& b, double t) {
  const DMatrix I = DMatrix::Identity(a.rows(), a.cols());
  const DMatrix ep = (a * t).exp();
  const DMatrix em = (-a * t).exp();
  const DMatrix num = ep * (I + b) - em * (I - b);
  const DMatrix den = ep * (I + b) + em * (I - b);
  // q = e^{-at} num den^{-1} e^{at}
  const DMatrix q = em * num * den.inverse() * ep;
  return {t, q, 1.0 / std::sqrt((den * 0.5).determinant())};
}

// RK4 for dq/dt = (1+q) a (1-q), dg/dt = -tr(aq) g / 2 with q(0) = Lambda B, g(0) = 1.
inline RiccatiPath riccati_solve(const QuadraticForm& A, const QuadraticForm& B, double t_end, int steps,
                                 const SymplecticFrame& frame, double singular_tol = 1e-9) {
  if (steps < 1) throw DomainError("steps must be at least 1");
  if (A.vars() != frame.vars() || B.vars() != frame.vars()) throw DimensionMismatch("quadratic form size differs from 2n");
  const DMatrix a = to_eigen(frame.lambda() * A.A);
  const DMatrix b = to_eigen(frame.lambda() * B.A);
  const DMatrix I = DMatrix::Identity(a.rows(), a.cols());
  const double h = t_end / steps;
  std::vector<double> d(static_cast<std::size_t>(steps + 1));
  for (int s = 0; s <= steps; ++s) d[static_cast<std::size_t>(s)] = riccati_denominator_det(a, b, h * s);
  auto at = [&](int s) { return d[static_cast<std::size_t>(s)]; };
  for (int s = 0; s <= steps; ++s) {
    if (!(std::abs(at(s)) > singular_tol)) throw SingularityError("Riccati flow blows up", h * s);
    if (s > 0 && at(s) * at(s - 1) < 0) {
      double lo = h * (s - 1), hi = h * s;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (riccati_denominator_det(a, b, mid) * at(s - 1) < 0 ? hi : lo) = mid;
      }
      throw SingularityError("Riccati flow blows up", 0.5 * (lo + hi));
    }
    // A double root touches zero without a sign change; refine local minima of |det|.
    if (s > 0 && s < steps && std::abs(at(s)) <= std::abs(at(s - 1)) && std::abs(at(s)) <= std::abs(at(s + 1))) {
      double lo = h * (s - 1), hi = h * (s + 1);
      for (int it = 0; it < 100; ++it) {
        const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (std::abs(riccati_denominator_det(a, b, m1)) < std::abs(riccati_denominator_det(a, b, m2)))
          hi = m2;
        else
          lo = m1;
      }
      const double tm = 0.5 * (lo + hi);
      if (std::abs(riccati_denominator_det(a, b, tm)) <= singular_tol) throw SingularityError("Riccati flow blows up", tm);
    }
  }
  auto fq = [&](const DMatrix& q) -> DMatrix { return (I + q) * a * (I - q); };
  auto fg = [&](const DMatrix& q, double g) { return -0.5 * (a * q).trace() * g; };
  RiccatiPath path;
  DMatrix q = b;
  double g = 1.0;
  path.samples.push_back({0.0, q, g});
  for (int s = 0; s < steps; ++s) {
    const DMatrix k1 = fq(q);
    const double l1 = fg(q, g);
    const DMatrix q2 = q + 0.5 * h * k1;
    const DMatrix k2 = fq(q2);
    const double l2 = fg(q2, g + 0.5 * h * l1);
    const DMatrix q3 = q + 0.5 * h * k2;
    const DMatrix k3 = fq(q3);
    const double l3 = fg(q3, g + 0.5 * h * l2);
    const DMatrix q4 = q + h * k3;
    const DMatrix k4 = fq(q4);
    const double l4 = fg(q4, g + h * l3);
    q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    g += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    path.samples.push_back({h * (s + 1), q, g});
  }
  return path;
}

}  // namespace starforge
