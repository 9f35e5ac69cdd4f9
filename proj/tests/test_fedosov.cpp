#include <gtest/gtest.h>

#include "starforge/fedosov.hpp"
#include "starforge/random.hpp"
#include "starforge/weyl_functions.hpp"

using namespace starforge;

namespace {

Monomial mono(std::initializer_list<int> fiber, std::initializer_list<int> base, std::uint16_t forms, int nu = 0) {
  Monomial m;
  m.nu = nu;
  for (int i : fiber) ++m.fiber[static_cast<std::size_t>(i)];
  for (int i : base) ++m.base[static_cast<std::size_t>(i)];
  m.forms = forms;
  return m;
}

// Random section of form degree <= max_form with fiber, base, and nu content.
FormSection random_form_section(Rng& rng, int n, int N, int terms, int max_form) {
  FormSection s(n, N);
  const int v = 2 * n;
  for (int t = 0; t < terms; ++t) {
    Monomial m;
    m.nu = rng.uniform(0, 1);
    const int fd = rng.uniform(0, 3);
    for (int k = 0; k < fd; ++k) ++m.fiber[static_cast<std::size_t>(rng.uniform(0, v - 1))];
    const int bd = rng.uniform(0, 2);
    for (int k = 0; k < bd; ++k) ++m.base[static_cast<std::size_t>(rng.uniform(0, v - 1))];
    const int q = rng.uniform(0, max_form);
    for (int k = 0; k < q; ++k) m.forms |= static_cast<std::uint16_t>(1u << rng.uniform(0, v - 1));
    s.add(m, rng.nonzero_rational());
  }
  return s;
}

SymplecticConnection random_connection(Rng& rng, const SymplecticFrame& frame) {
  const int v = frame.vars();
  std::vector<Rational> low(static_cast<std::size_t>(v * v * v), 0);
  for (int a = 0; a < v; ++a)
    for (int b = a; b < v; ++b)
      for (int c = b; c < v; ++c) {
        Rational x = rng.coin() ? rng.rational(2, 2) : Rational(0);
        const int idx[6][3] = {{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}};
        for (const auto& p : idx) low[static_cast<std::size_t>((p[0] * v + p[1]) * v + p[2])] = x;
      }
  return SymplecticConnection::from_lowered(frame, low);
}

// nu^2 d(alpha) for a random polynomial 1-form alpha: central and closed.
FormSection random_central_curvature(Rng& rng, int n, int N) {
  FormSection alpha(n, N);
  for (int t = 0; t < 3; ++t) {
    Monomial m;
    m.nu = 2;
    const int bd = rng.uniform(1, 2);
    for (int k = 0; k < bd; ++k) ++m.base[static_cast<std::size_t>(rng.uniform(0, 2 * n - 1))];
    m.forms = static_cast<std::uint16_t>(1u << rng.uniform(0, 2 * n - 1));
    alpha.add(m, rng.nonzero_rational());
  }
  return exterior_d(alpha);
}

FormSection constant_central_curvature(int n, int N, const Rational& c) {
  FormSection R(n, N);
  R.add(mono({}, {}, 0b11, 2), c);
  if (n > 1) R.add(mono({}, {}, 0b1100, 2), c * 2);
  return R;
}

}  // namespace

TEST(Delta, ConstantIsClosed) {
  auto frame = SymplecticFrame::def41(1);
  EXPECT_TRUE(delta(WeylSeries::constant(1, 5, 3), frame).is_zero());
}

TEST(Delta, MatchesCommutatorOracle) {
  Rng rng(101);
  for (int n = 1; n <= 2; ++n)
    for (auto conv : {LambdaConvention::def41, LambdaConvention::appendix62}) {
      auto frame = SymplecticFrame::make(n, conv);
      const int N = 6;
      for (int i = 0; i < 2 * n; ++i) {
        auto Zi = WeylSeries::fiber(n, N, i);
        EXPECT_EQ(delta(Zi, frame), ad_nu(theta_form(frame, N), Zi, frame, N));
        EXPECT_EQ(delta(Zi, frame), WeylSeries::term(n, N, mono({}, {}, static_cast<std::uint16_t>(1u << i)), 1));
      }
      for (int t = 0; t < 10; ++t) {
        auto a = random_form_section(rng, n, N, 6, 1);
        EXPECT_EQ(delta(a, frame), ad_nu(theta_form(frame, N + 1), a, frame, N));
      }
    }
}

TEST(Delta, SquaresToZero) {
  Rng rng(103);
  for (int n = 1; n <= 2; ++n) {
    auto frame = SymplecticFrame::def41(n);
    for (int t = 0; t < 20; ++t) {
      auto a = random_form_section(rng, n, 7, 6, 0);
      EXPECT_TRUE(delta(delta(a, frame), frame).is_zero());
      auto b = random_form_section(rng, n, 7, 6, 2);
      EXPECT_TRUE(delta_inv(delta_inv(b, frame), frame).is_zero());
    }
  }
}

TEST(Delta, FormDegreeOverflow) {
  auto frame = SymplecticFrame::def41(1);
  auto two = WeylSeries::term(1, 4, mono({0}, {}, 0b11), 1);
  EXPECT_THROW(delta(two, frame), DomainError);
  EXPECT_THROW(nabla_symp(two, SymplecticConnection::zero(2), frame), DomainError);
}

TEST(DeltaInv, ScalarIsZero) {
  auto frame = SymplecticFrame::def41(2);
  auto f = WeylSeries::term(2, 5, mono({}, {0, 3}, 0, 2), 7);
  EXPECT_TRUE(delta_inv(f, frame).is_zero());
}

TEST(DeltaInv, HodgeDecomposition) {
  Rng rng(107);
  for (int n = 1; n <= 2; ++n) {
    auto frame = SymplecticFrame::def41(n);
    for (int t = 0; t < 30; ++t) {
      // delta is only applied to form degree <= 1, so take a 0-form and a 1-form separately.
      for (int q = 0; q <= 1; ++q) {
        FormSection a(n, 7);
        const auto src = random_form_section(rng, n, 7, 8, 1);
        for (const auto& [m, c] : src.terms())
          if (m.form_degree() == q) a.add(m, c);
        FormSection lhs = delta_inv(delta(a, frame), frame) + central_projection(a);
        lhs += delta(delta_inv(a, frame), frame);
        EXPECT_EQ(lhs, a);
      }
    }
  }
}

TEST(DeltaInv, TwoFormHodgeOnDeltaExact) {
  // For 2-forms delta delta^{-1} b = b whenever delta b = 0; at n = 1 every 2-form qualifies.
  Rng rng(109);
  auto frame = SymplecticFrame::def41(1);
  for (int t = 0; t < 20; ++t) {
    FormSection b(1, 7);
    const auto src = random_form_section(rng, 1, 7, 8, 2);
    for (const auto& [m, c] : src.terms())
      if (m.form_degree() == 2) b.add(m, c);
    EXPECT_EQ(delta(delta_inv(b, frame), frame), b);
  }
}

TEST(Nabla, FlatCaseIsExteriorDerivative) {
  auto frame = SymplecticFrame::def41(1);
  auto a = WeylSeries::term(1, 4, mono({1}, {0}, 0), 1);
  auto expected = WeylSeries::term(1, 4, mono({1}, {}, 0b01), 1);
  EXPECT_EQ(nabla_symp(a, SymplecticConnection::zero(2), frame), expected);
}

TEST(Nabla, ChristoffelActionOnFiber) {
  // nabla Z^p = -Gamma^p_{kl} Z^k dz^l.
  Rng rng(113);
  auto frame = SymplecticFrame::def41(2);
  auto g = random_connection(rng, frame);
  auto up = g.christoffel(frame);
  const int v = 4;
  for (int p = 0; p < v; ++p) {
    FormSection expected(2, 4);
    for (int k = 0; k < v; ++k)
      for (int l = 0; l < v; ++l)
        expected.add(mono({k}, {}, static_cast<std::uint16_t>(1u << l)), -up[static_cast<std::size_t>((p * v + k) * v + l)]);
    EXPECT_EQ(nabla_symp(WeylSeries::fiber(2, 4, p), g, frame), expected);
  }
  EXPECT_EQ(SymplecticConnection::from_christoffel(frame, up).christoffel(frame), up);
}

TEST(Nabla, RejectsNonSymplecticConnection) {
  auto frame = SymplecticFrame::def41(1);
  std::vector<Rational> low(8, 0);
  low[1] = 1;  // Gamma_{001} without its permutations
  EXPECT_THROW(SymplecticConnection::from_lowered(frame, low), DomainError);
}

TEST(Nabla, Leibniz) {
  Rng rng(127);
  for (int n = 1; n <= 2; ++n) {
    auto frame = SymplecticFrame::def41(n);
    for (int t = 0; t < 10; ++t) {
      auto g = random_connection(rng, frame);
      auto a = random_form_section(rng, n, 6, 5, 0);
      auto b = random_form_section(rng, n, 6, 5, 1);
      auto lhs = nabla_symp(moyal_product(a, b, frame), g, frame);
      auto rhs = moyal_product(nabla_symp(a, g, frame), b, frame) + moyal_product(a, nabla_symp(b, g, frame), frame);
      EXPECT_EQ(lhs, rhs);
    }
  }
}

TEST(Nabla, SquareIsCurvature) {
  Rng rng(131);
  for (int n = 1; n <= 2; ++n) {
    auto frame = SymplecticFrame::def41(n);
    for (int t = 0; t < 8; ++t) {
      auto a = random_form_section(rng, n, 6, 5, 0);
      EXPECT_TRUE(nabla_symp(nabla_symp(a, SymplecticConnection::zero(2 * n), frame), SymplecticConnection::zero(2 * n), frame).is_zero());
      auto g = random_connection(rng, frame);
      auto R = curvature_of(g, frame, 6);
      EXPECT_EQ(nabla_symp(nabla_symp(a, g, frame), g, frame), ad_nu(R, a, frame, 6));
    }
  }
}

TEST(Fedosov, ZeroCurvatureGivesZero) {
  auto frame = SymplecticFrame::def41(1);
  FedosovState s(frame, SymplecticConnection::zero(2), FormSection(1, 8), 8);
  EXPECT_TRUE(fedosov_recursion(s).is_zero());
  EXPECT_TRUE(flatness_defect(s).is_zero());
}

TEST(Fedosov, FirstTermByHand) {
  auto frame = SymplecticFrame::def41(1);
  FormSection R(1, 6);
  R.add(mono({0, 0}, {}, 0b11), 1);
  FedosovState s(frame, SymplecticConnection::zero(2), R, 6);
  auto r = fedosov_recursion(s);
  // delta^{-1}(Z1^2 dz1 dz2) = (Z1^3 dz2 - Z1^2 Z2 dz1) / 4
  FormSection r3(1, 6);
  r3.add(mono({0, 0, 0}, {}, 0b10), Rational(1, 4));
  r3.add(mono({0, 0, 1}, {}, 0b01), Rational(-1, 4));
  EXPECT_EQ(degree_part(r, 3), r3);
}

TEST(Fedosov, RejectsMalformedCurvature) {
  auto frame = SymplecticFrame::def41(1);
  FedosovState one_form(frame, SymplecticConnection::zero(2), WeylSeries::term(1, 5, mono({0, 0}, {}, 0b01), 1), 5);
  EXPECT_THROW(fedosov_recursion(one_form), DomainError);
  FedosovState low(frame, SymplecticConnection::zero(2), WeylSeries::term(1, 5, mono({}, {}, 0b11), 1), 5);
  EXPECT_THROW(fedosov_recursion(low), DomainError);
}

TEST(Fedosov, CurvatureBatteryIsFlat) {
  Rng rng(137);
  for (int n = 1; n <= 2; ++n) {
    auto frame = SymplecticFrame::def41(n);
    const int v = 2 * n;
    for (int N = 3; N <= (n == 1 ? 10 : 7); ++N) {
      std::vector<FedosovState> battery;
      battery.emplace_back(frame, SymplecticConnection::zero(v), constant_central_curvature(n, N, Rational(3, 2)), N);
      battery.emplace_back(frame, SymplecticConnection::zero(v), random_central_curvature(rng, n, N), N);
      auto g = random_connection(rng, frame);
      battery.emplace_back(frame, g, curvature_of(g, frame, N), N);
      battery.emplace_back(frame, g, curvature_of(g, frame, N) + random_central_curvature(rng, n, N), N);
      for (auto& s : battery) {
        auto r = fedosov_recursion(s);
        EXPECT_TRUE(flatness_defect(s).is_zero()) << "n=" << n << " N=" << N << "\n" << flatness_defect(s);
        EXPECT_TRUE(delta_inv(r, frame).is_zero());
        for (const auto& [m, c] : r.terms()) EXPECT_GE(m.weight(), 3);
      }
    }
  }
}

TEST(Fedosov, MutationIsDetected) {
  auto frame = SymplecticFrame::def41(1);
  const int N = 8;
  FedosovState s(frame, SymplecticConnection::zero(2), constant_central_curvature(1, N, 1), N);
  fedosov_recursion(s);
  ASSERT_TRUE(flatness_defect(s).is_zero());
  s.r.add(mono({0, 0, 0, 0}, {}, 0b10), 1);  // weight 4
  auto defect = flatness_defect(s);
  ASSERT_FALSE(defect.is_zero());
  EXPECT_EQ(min_degree(defect), 3);
}

TEST(FlatSection, TrivialConnectionGivesWeylContinuation) {
  Rng rng(139);
  for (int n = 1; n <= 2; ++n) {
    auto frame = SymplecticFrame::def41(n);
    FedosovState s(frame, SymplecticConnection::zero(2 * n), FormSection(n, 6), 6);
    fedosov_recursion(s);
    for (int t = 0; t < 10; ++t) {
      auto f = random_base_poly(rng, n, 6, 4, 3);
      EXPECT_EQ(flat_section(f, s), weyl_continuation(f, frame));
    }
    EXPECT_EQ(flat_section(WeylSeries::constant(n, 6, 1), s), WeylSeries::constant(n, 6, 1));
  }
}

TEST(FlatSection, ParallelSectionsFormAnAlgebra) {
  Rng rng(149);
  auto frame = SymplecticFrame::def41(1);
  const int N = 7;
  auto g = random_connection(rng, frame);
  FedosovState s(frame, g, curvature_of(g, frame, N) + constant_central_curvature(1, N, 2), N);
  fedosov_recursion(s);
  ASSERT_TRUE(flatness_defect(s).is_zero());
  for (int t = 0; t < 5; ++t) {
    auto f = random_base_poly(rng, 1, N, 3, 2);
    auto h = random_base_poly(rng, 1, N, 3, 2);
    auto sf = flat_section(f, s);
    auto sh = flat_section(h, s);
    EXPECT_EQ(fiber_zero_part(sf), f);
    EXPECT_TRUE(flat_defect_of(sf, s).is_zero());
    EXPECT_TRUE(flat_defect_of(moyal_product(sf, sh, s.frame), s).is_zero());
  }
}

TEST(FlatSection, StarProductAxioms) {
  Rng rng(151);
  auto frame = SymplecticFrame::def41(1);
  const int N = 6;
  auto g = random_connection(rng, frame);
  FedosovState s(frame, g, curvature_of(g, frame, N) + constant_central_curvature(1, N, 1), N);
  fedosov_recursion(s);
  for (int t = 0; t < 4; ++t) {
    auto a = random_homogeneous_base(rng, 1, N, 2, 3);
    auto b = random_homogeneous_base(rng, 1, N, 2, 3);
    auto c = random_homogeneous_base(rng, 1, N, 2, 3);
    auto ab = fedosov_star(a, b, s);
    EXPECT_EQ(nu_coefficient(ab, 0), pointwise_product(a, b));
    // Associativity holds up to the nu-order the truncation resolves.
    auto lhs = fedosov_star(ab, c, s);
    auto rhs = fedosov_star(a, fedosov_star(b, c, s), s);
    EXPECT_EQ(nu_truncate(lhs, (N - 2) / 2), nu_truncate(rhs, (N - 2) / 2));
  }
}

TEST(FlatSection, RequiresFlatState) {
  auto frame = SymplecticFrame::def41(1);
  FedosovState s(frame, SymplecticConnection::zero(2), constant_central_curvature(1, 6, 1), 6);
  EXPECT_THROW(flat_section(WeylSeries::constant(1, 6, 1), s), DomainError);
}
