#include <gtest/gtest.h>

#include "starforge/random.hpp"
#include "starforge/star_exp.hpp"

using namespace starforge;

namespace {

SymplecticFrame app(int n) { return SymplecticFrame::appendix62(n); }

// Euler and tangent numbers: sec t = sum E_{2k} t^{2k}/(2k)!, tan t = sum T_{2k+1} t^{2k+1}/(2k+1)!.
const long kSecNumbers[] = {1, 1, 5, 61, 1385};
const long kTanNumbers[] = {1, 2, 16, 272, 7936};

Rational sec_coeff(int k) { return k % 2 ? Rational(0) : Rational(kSecNumbers[k / 2]) / factorial(k); }
Rational tan_coeff(int k) { return k % 2 ? Rational(kTanNumbers[k / 2]) / factorial(k) : Rational(0); }

QuadraticForm random_form(Rng& rng, int n, bool diagonal) {
  RatMatrix A = random_symmetric(rng, 2 * n, 2, 2);
  if (diagonal)
    for (int i = 0; i < 2 * n; ++i)
      for (int j = 0; j < 2 * n; ++j)
        if (i != j) A(i, j) = 0;
  return QuadraticForm(A);
}

}  // namespace

TEST(StarExpTaylor, LowOrders) {
  auto frame = app(1);
  QuadraticForm A(RatMatrix{{1, 2}, {2, 3}});
  auto F0 = star_exp_taylor(A, 0, frame);
  ASSERT_EQ(F0.coeffs.size(), 1u);
  EXPECT_EQ(F0.coeffs[0], WeylSeries::constant(1, 0, 1));
  auto F1 = star_exp_taylor(A, 1, frame);
  // t A[Z]/mu = -t nu^{-1} A[Z]
  EXPECT_EQ(F1.coeffs[1], -A.to_series(1, 2));
}

TEST(StarExpTaylor, RejectsNonSymmetric) {
  EXPECT_THROW(QuadraticForm(RatMatrix{{1, 2}, {0, 1}}), DomainError);
  EXPECT_THROW(star_exp_taylor(QuadraticForm(RatMatrix::identity(2)), -1, app(1)), DomainError);
  EXPECT_THROW(star_exp_taylor(QuadraticForm(RatMatrix::identity(4)), 2, app(1)), DimensionMismatch);
}

TEST(StarExpClosed, ZeroForm) {
  auto F = star_exp_closed(QuadraticForm(RatMatrix(2, 2)), 5, app(1));
  EXPECT_EQ(F.coeffs[0], WeylSeries::constant(1, 10, 1));
  for (int k = 1; k <= 5; ++k) EXPECT_TRUE(F.coeffs[static_cast<std::size_t>(k)].is_zero());
}

TEST(StarExpClosed, IdentityFormGivesSecAndTan) {
  auto frame = app(1);
  QuadraticForm A(RatMatrix::identity(2));
  const int K = 9;
  auto g = star_exp_amplitude(A, K, frame);
  auto Q = star_exp_phase(A, K, frame);
  for (int k = 0; k <= K; ++k) {
    EXPECT_EQ(g[static_cast<std::size_t>(k)], sec_coeff(k)) << k;
    EXPECT_EQ(Q.coeffs[static_cast<std::size_t>(k)], A.A * tan_coeff(k)) << k;
  }
}

TEST(StarExpRoutes, IdentityFormThroughCubic) {
  auto frame = app(1);
  QuadraticForm A(RatMatrix::identity(2));
  EXPECT_EQ(star_exp_taylor(A, 3, frame), star_exp_closed(A, 3, frame));
}

TEST(StarExpRoutes, RandomDiagonalN1) {
  Rng rng(71);
  auto frame = app(1);
  for (int t = 0; t < 10; ++t) {
    auto A = random_form(rng, 1, true);
    EXPECT_EQ(star_exp_taylor(A, 6, frame), star_exp_closed(A, 6, frame));
  }
}

TEST(StarExpRoutes, RandomSymmetric) {
  Rng rng(73);
  for (int n = 1; n <= 2; ++n) {
    auto frame = app(n);
    for (int t = 0; t < (n == 1 ? 8 : 3); ++t) {
      auto A = random_form(rng, n, false);
      const int K = n == 1 ? 6 : 4;
      EXPECT_EQ(star_exp_taylor(A, K, frame), star_exp_closed(A, K, frame));
    }
  }
}

TEST(StarExpRoutes, EvolutionEquation) {
  Rng rng(79);
  auto frame = app(1);
  for (int t = 0; t < 5; ++t) {
    auto A = random_form(rng, 1, false);
    for (const auto& d : evolution_defect(A, star_exp_closed(A, 5, frame), frame)) EXPECT_TRUE(d.is_zero()) << d;
  }
}

TEST(Cayley, ZeroIsIdentity) { EXPECT_EQ(cayley(RatMatrix(4, 4)), RatMatrix::identity(4)); }

TEST(Cayley, SymplecticImage) {
  Rng rng(83);
  for (int n = 1; n <= 2; ++n) {
    auto frame = app(n);
    const auto& L = frame.lambda();
    for (int t = 0; t < 10; ++t) {
      RatMatrix X = L * random_symmetric(rng, 2 * n, 3, 2);
      ASSERT_TRUE((X.transpose() * L + L * X).is_zero());
      if (sgn((RatMatrix::identity(2 * n) + X).det()) == 0) continue;
      RatMatrix C = cayley(X);
      EXPECT_EQ(C.transpose() * L * C, L);
    }
  }
}

TEST(Cayley, RoundTrip) {
  Rng rng(89);
  for (int t = 0; t < 20; ++t) {
    RatMatrix X = random_matrix(rng, 3, 3);
    if (sgn((RatMatrix::identity(3) + X).det()) == 0) continue;
    EXPECT_EQ(cayley_inv(cayley(X)), X);
  }
}

TEST(Cayley, SingularThrows) { EXPECT_THROW(cayley(-RatMatrix::identity(2)), DomainError); }

TEST(Riccati, StationaryWhenAIsZero) {
  auto frame = app(1);
  QuadraticForm B(RatMatrix{{1, Rational(1, 3)}, {Rational(1, 3), Rational(1, 2)}});
  auto path = riccati_solve(QuadraticForm(RatMatrix(2, 2)), B, 0.7, 50, frame);
  const DMatrix b = to_eigen(frame.lambda() * B.A);
  for (const auto& s : path.samples) {
    EXPECT_LT((s.q - b).norm(), 1e-14);
    EXPECT_NEAR(s.g, 1.0, 1e-14);
  }
}

TEST(Riccati, MatchesClosedForm) {
  auto frame = app(1);
  QuadraticForm A(RatMatrix::identity(2));
  QuadraticForm B(RatMatrix(2, 2));
  auto path = riccati_solve(A, B, 0.5, 1000, frame);
  const DMatrix a = to_eigen(frame.lambda() * A.A);
  const DMatrix b = DMatrix::Zero(2, 2);
  auto ref = riccati_closed(a, b, 0.5);
  const auto& end = path.samples.back();
  EXPECT_LT((end.q - ref.q).norm(), 1e-8);
  EXPECT_NEAR(end.g, ref.g, 1e-8);
  // q = C^{-1}(e^{-2at})
  EXPECT_LT((end.q - cayley(DMatrix((-2.0 * 0.5 * a).exp()))).norm(), 1e-8);
  EXPECT_NEAR(end.g, 1.0 / std::cos(0.5), 1e-8);
}

TEST(Riccati, NonzeroInitialDataAndInvariants) {
  Rng rng(97);
  for (int n = 1; n <= 2; ++n) {
    auto frame = app(n);
    const DMatrix L = to_eigen(frame.lambda());
    for (int t = 0; t < 4; ++t) {
      QuadraticForm A(random_symmetric(rng, 2 * n, 1, 2));
      QuadraticForm B(random_symmetric(rng, 2 * n, 1, 4));
      const DMatrix a = to_eigen(frame.lambda() * A.A);
      const DMatrix b = to_eigen(frame.lambda() * B.A);
      // C(b) needs 1 + b invertible.
      if (std::abs((DMatrix::Identity(2 * n, 2 * n) + b).determinant()) < 1e-3) continue;
      RiccatiPath path;
      try {
        path = riccati_solve(A, B, 0.3, 600, frame);
      } catch (const SingularityError&) {
        continue;
      }
      const DMatrix Cb = cayley(b);
      for (std::size_t s = 0; s < path.samples.size(); s += 100) {
        const auto& p = path.samples[s];
        auto ref = riccati_closed(a, b, p.t);
        EXPECT_LT((p.q - ref.q).norm(), 1e-8);
        EXPECT_NEAR(p.g, ref.g, 1e-8);
        const DMatrix Cq = cayley(p.q);
        // C(q(t)) = e^{-2at} C(b), and C(q) stays symplectic.
        EXPECT_LT((Cq - (-2.0 * p.t * a).exp() * Cb).norm(), 1e-8);
        EXPECT_LT((Cq.transpose() * L * Cq - L).norm(), 1e-8);
      }
    }
  }
}

TEST(Riccati, DetectsBlowUp) {
  auto frame = app(1);
  // cos t vanishes at pi/2.
  try {
    riccati_solve(QuadraticForm(RatMatrix::identity(2)), QuadraticForm(RatMatrix(2, 2)), 2.0, 200, frame);
    FAIL() << "expected a singularity";
  } catch (const SingularityError& e) {
    EXPECT_NEAR(e.critical_t(), 1.5707963, 0.02);
  }
}
