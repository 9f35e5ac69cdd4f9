#include <gtest/gtest.h>

#include "oracles.hpp"
#include "starforge/lift.hpp"
#include "starforge/random.hpp"

using namespace starforge;

namespace {

constexpr int T = 40;

WeylSeries zv(int n, int i) { return WeylSeries::base(n, T, i); }
WeylSeries cst(int n, const Rational& c) { return WeylSeries::constant(n, T, c); }
WeylSeries mul(const WeylSeries& a, const WeylSeries& b) { return pointwise_product(a, b); }

// (x + (y + x^2)^2, y + x^2)
std::vector<BasePolynomial> composed_shears() {
  auto x = zv(1, 0);
  auto y = zv(1, 1);
  auto v = y + mul(x, x);
  return {x + mul(v, v), v};
}

// (u, v + u^2) with u = x + v^2, v = y + x^2.
std::vector<BasePolynomial> three_shears() {
  auto c = composed_shears();
  return {c[0], c[1] + mul(c[0], c[0])};
}

// Triangular shears (x, y + grad p(x)) and (x + grad q(y), y) composed, any n.
std::vector<BasePolynomial> random_shear_map(Rng& rng, int n, int factors) {
  std::vector<BasePolynomial> phi;
  for (int i = 0; i < 2 * n; ++i) phi.push_back(zv(n, i));
  for (int f = 0; f < factors; ++f) {
    const bool lower = f % 2 == 0;
    // Generating polynomial in the half of the variables that stays fixed.
    WeylSeries p(n, T);
    for (int t = 0; t < 2; ++t) {
      Monomial m;
      const int d = rng.uniform(2, 3);
      for (int k = 0; k < d; ++k) ++m.base[static_cast<std::size_t>(rng.uniform(0, n - 1) + (lower ? 0 : n))];
      p.add(m, Rational(rng.uniform(1, 2), rng.uniform(1, 2)));
    }
    std::vector<BasePolynomial> step;
    for (int i = 0; i < 2 * n; ++i) step.push_back(zv(n, i));
    for (int i = 0; i < n; ++i) {
      if (lower)
        step[static_cast<std::size_t>(n + i)] += d_base(p, i);
      else
        step[static_cast<std::size_t>(i)] += d_base(p, n + i);
    }
    // phi <- step o phi
    std::vector<BasePolynomial> next;
    for (const auto& s : step) {
      WeylSeries acc(n, T);
      for (const auto& [m, c] : s.terms()) {
        WeylSeries term = cst(n, c);
        for (int k = 0; k < 2 * n; ++k)
          term = mul(term, pointwise_power(phi[static_cast<std::size_t>(k)], m.base[static_cast<std::size_t>(k)]));
        acc += term;
      }
      next.push_back(acc);
    }
    phi = next;
  }
  return phi;
}

FormSection central_omega_curvature(int n, int N) {
  FormSection R(n, N);
  for (int i = 0; i < n; ++i) {
    Monomial m;
    m.nu = 2;
    m.forms = static_cast<std::uint16_t>((1u << i) | (1u << (n + i)));
    R.add(m, 1);
  }
  return R;
}

}  // namespace

TEST(CheckSymplectic, Examples) {
  auto frame = SymplecticFrame::def41(1);
  auto x = zv(1, 0);
  auto y = zv(1, 1);
  EXPECT_TRUE(check_symplectic({x, y}, frame).ok);
  EXPECT_TRUE(check_symplectic({x, y + mul(x, x)}, frame).ok);
  auto bad = check_symplectic({x * Rational(2), y}, frame);
  EXPECT_FALSE(bad.ok);
  ASSERT_EQ(bad.violations.size(), 1u);
  EXPECT_EQ(bad.violations[0], std::make_pair(1, 2));
  EXPECT_THROW(PolySymplectomorphism::make({x * Rational(2), y}, frame), DomainError);
}

TEST(CheckSymplectic, BothConventions) {
  Rng rng(401);
  for (auto frame : {SymplecticFrame::def41(2), SymplecticFrame::appendix62(2)}) {
    EXPECT_TRUE(check_symplectic(random_shear_map(rng, 2, 2), frame).ok);
    EXPECT_NO_THROW(PolySymplectomorphism::linear(random_symplectic(rng, 2), frame));
  }
}

TEST(CcrDefect, LinearIsZero) {
  Rng rng(403);
  for (int n = 1; n <= 2; ++n) {
    auto frame = SymplecticFrame::def41(n);
    auto phi = PolySymplectomorphism::linear(random_symplectic(rng, n), frame, T);
    EXPECT_TRUE(ccr_defect(phi, 7, frame).is_zero());
  }
}

TEST(CcrDefect, SingleShearIsZero) {
  auto frame = SymplecticFrame::def41(1);
  auto x = zv(1, 0);
  auto phi = PolySymplectomorphism::make({x, zv(1, 1) + mul(x, mul(x, x))}, frame);
  EXPECT_TRUE(ccr_defect(phi, 7, frame).is_zero());
}

TEST(CcrDefect, TwoShearsAreExact) {
  auto frame = SymplecticFrame::def41(1);
  // v * v = v^2 for v = y + x^2, so [x + v^2, v] has no quantum tail.
  auto phi = composed_shears();
  auto tab = ccr_defect(phi, 7, frame);
  EXPECT_TRUE(tab.is_zero());
  auto a = weyl_continuation(phi[0].with_trunc(8), frame);
  auto b = weyl_continuation(phi[1].with_trunc(8), frame);
  auto comm = fiber_zero_part(oracle::moyal(a, b, frame) - oracle::moyal(b, a, frame));
  EXPECT_TRUE(nu_coefficient(comm, 3).is_zero());
}

TEST(CcrDefect, ThreeShearsMatchOracle) {
  auto frame = SymplecticFrame::def41(1);
  auto phi = three_shears();
  auto tab = ccr_defect(phi, 5, frame);
  EXPECT_EQ(tab.lowest_order(), 3);
  // Brute-force commutator of the continuations; degree 8 components need fiber weight 16.
  auto a = weyl_continuation(phi[0].with_trunc(16), frame);
  auto b = weyl_continuation(phi[1].with_trunc(16), frame);
  auto comm = fiber_zero_part(oracle::moyal(a, b, frame) - oracle::moyal(b, a, frame));
  EXPECT_EQ(nu_coefficient(comm, 1), cst(1, frame.lambda(0, 1)).with_trunc(16));
  EXPECT_EQ(tab.orders.at(3)[0][1].with_trunc(16), nu_coefficient(comm, 3));
  EXPECT_EQ(tab.orders.at(5)[0][1].with_trunc(16), nu_coefficient(comm, 5));
  EXPECT_FALSE(tab.orders.at(3)[0][1].is_zero());
  EXPECT_EQ(tab.orders.at(3)[1][0], -tab.orders.at(3)[0][1]);
}

TEST(CcrDefect, Preconditions) {
  auto frame = SymplecticFrame::def41(1);
  EXPECT_THROW(ccr_defect({zv(1, 0) * Rational(2), zv(1, 1)}, 5, frame), DomainError);
  EXPECT_THROW(ccr_defect(composed_shears(), 2, frame), DomainError);
}

TEST(Closedness, ZeroDefect) {
  auto frame = SymplecticFrame::def41(1);
  auto phi = PolySymplectomorphism::identity(frame, T);
  auto rep = closedness_audit(ccr_defect(phi, 3, frame), phi.components, frame);
  EXPECT_TRUE(rep.omega_pullback.is_zero());
  EXPECT_TRUE(rep.closed);
  EXPECT_TRUE(rep.jacobi);
}

TEST(Closedness, ThreeShears) {
  auto frame = SymplecticFrame::def41(1);
  auto phi = three_shears();
  auto rep = closedness_audit(ccr_defect(phi, 3, frame), phi, frame);
  // At n = 1 every 2-form is closed; the bracket identity is the real content.
  EXPECT_FALSE(rep.omega_pullback.is_zero());
  EXPECT_TRUE(rep.closed);
  EXPECT_TRUE(rep.jacobi);
}

TEST(Closedness, RandomBattery) {
  Rng rng(409);
  for (auto frame : {SymplecticFrame::def41(2), SymplecticFrame::appendix62(2)}) {
    for (int t = 0; t < 4; ++t) {
      auto phi = random_shear_map(rng, 2, 3);
      auto tab = ccr_defect(phi, 3, frame);
      auto rep = closedness_audit(tab, phi, frame);
      EXPECT_TRUE(rep.closed) << rep.d_omega;
      EXPECT_TRUE(rep.jacobi);
    }
  }
}

TEST(Closedness, DetectsTamperedDefect) {
  auto frame = SymplecticFrame::def41(2);
  Rng rng(419);
  auto phi = PolySymplectomorphism::identity(frame, T);
  std::vector<std::vector<BasePolynomial>> a(4, std::vector<BasePolynomial>(4, WeylSeries(2, T)));
  // a^{13} = x2 alone breaks the bracket identity.
  a[0][2] = zv(2, 1);
  a[2][0] = -zv(2, 1);
  auto rep = closedness_audit(a, phi.components, frame);
  EXPECT_FALSE(rep.closed);
  EXPECT_FALSE(rep.jacobi);
}

TEST(Homotopy, PrimitiveOfExactForm) {
  Rng rng(421);
  for (int n = 1; n <= 2; ++n) {
    for (int t = 0; t < 5; ++t) {
      FormSection beta(n, T);
      for (int k = 0; k < 2 * n; ++k)
        beta += pointwise_product(random_base_poly(rng, n, T, 3, 3), WeylSeries::form(n, T, k));
      auto omega = exterior_d(beta);
      EXPECT_EQ(exterior_d(homotopy_primitive(omega)), omega);
    }
  }
}

TEST(Repair, LinearNeedsNothing) {
  Rng rng(431);
  auto frame = SymplecticFrame::def41(2);
  auto phi = PolySymplectomorphism::linear(random_symplectic(rng, 2), frame, T);
  EXPECT_TRUE(ccr_repair(phi, 7, frame).is_zero());
}

TEST(Repair, ThreeShearsThroughNu5) {
  auto frame = SymplecticFrame::def41(1);
  auto phi = PolySymplectomorphism::make(three_shears(), frame);
  auto corr = ccr_repair(phi, 5, frame);
  EXPECT_FALSE(corr.is_zero());
  for (const auto& [o, g] : corr.by_order) EXPECT_EQ(o % 2, 0);
  auto fixed = corr.apply(phi.components);
  EXPECT_TRUE(ccr_defect(fixed, 5, frame).is_zero());
  // Only nu^7 may survive at the next order.
  auto next = ccr_defect(fixed, 9, frame);
  EXPECT_TRUE(next.zero_at(3));
  EXPECT_TRUE(next.zero_at(5));
}

TEST(Repair, RandomBattery) {
  Rng rng(433);
  int nontrivial = 0;
  for (auto frame : {SymplecticFrame::def41(1), SymplecticFrame::appendix62(2)}) {
    for (int t = 0; t < 3; ++t) {
      auto phi = PolySymplectomorphism::make(random_shear_map(rng, frame.dim_n(), frame.dim_n() == 1 ? 3 : 2), frame);
      auto corr = ccr_repair(phi, 5, frame);
      nontrivial += corr.is_zero() ? 0 : 1;
      EXPECT_TRUE(ccr_defect(corr.apply(phi.components), 5, frame).is_zero());
    }
  }
  EXPECT_GT(nontrivial, 0);
}

TEST(Mcw, IdentityGivesZero) {
  auto frame = SymplecticFrame::def41(1);
  FedosovState s(frame, SymplecticConnection::zero(2), central_omega_curvature(1, 6), 6);
  fedosov_recursion(s);
  auto F = mcw_lift_solve(PolySymplectomorphism::identity(frame), s.r, 6, frame);
  EXPECT_TRUE(F.is_zero());
}

TEST(Mcw, ShearLowestOrderByHand) {
  auto frame = SymplecticFrame::def41(1);
  const Rational sh(3, 2);
  auto phi = PolySymplectomorphism::linear(RatMatrix{{1, 0}, {sh, 1}}, frame);
  auto F = mcw_lift_solve(phi, FormSection(1, 6), 6, frame);
  // exp(ad(F/nu)) Z2 = Z2 + s Z1 forces F = -s/2 Z1^2 under Lambda^{12} = -1; nothing else is needed.
  Monomial m;
  m.fiber[0] = 2;
  EXPECT_EQ(F, WeylSeries::term(1, 6, m, -sh / 2));
  auto Z2 = WeylSeries::fiber(1, 6, 1);
  auto Z1 = WeylSeries::fiber(1, 6, 0);
  // ad(F/nu) is nilpotent here, so exp(ad(F/nu)) Z2 = Z2 + ad(F/nu) Z2.
  EXPECT_EQ(ad_nu(F, Z2, frame, 6), Z1 * sh);
  EXPECT_TRUE(ad_nu(F, Z1, frame, 6).is_zero());
  EXPECT_TRUE(mcw_residual(F, phi, FormSection(1, 6), 6, frame).is_zero());
}

TEST(Mcw, ResidualVanishesWithFedosovGamma) {
  Rng rng(439);
  for (int n = 1; n <= 2; ++n) {
    auto frame = SymplecticFrame::def41(n);
    const int N = n == 1 ? 7 : 5;
    FedosovState s(frame, SymplecticConnection::zero(2 * n), central_omega_curvature(n, N), N);
    fedosov_recursion(s);
    ASSERT_FALSE(s.r.is_zero());
    for (int t = 0; t < 2; ++t) {
      RatMatrix A = RatMatrix::identity(2 * n);
      RatMatrix S = random_symmetric(rng, n, 2, 2);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(t % 2 ? i : n + i, t % 2 ? n + j : j) = S(i, j);
      auto phi = PolySymplectomorphism::linear(A, frame);
      auto F = mcw_lift_solve(phi, s.r, N, frame);
      EXPECT_TRUE(mcw_residual(F, phi, s.r, N, frame).is_zero());
    }
  }
}

TEST(Mcw, Unsupported) {
  auto frame = SymplecticFrame::def41(1);
  // Hyperbolic scaling is symplectic but not unipotent.
  auto hyp = PolySymplectomorphism::linear(RatMatrix{{2, 0}, {0, Rational(1, 2)}}, frame);
  EXPECT_THROW(mcw_lift_solve(hyp, FormSection(1, 4), 4, frame), DomainError);
  auto shear = PolySymplectomorphism::make(composed_shears(), frame);
  EXPECT_THROW(mcw_lift_solve(shear, FormSection(1, 4), 4, frame), DomainError);
}

TEST(Cocycle, IdentityAndInverse) {
  Rng rng(443);
  auto frame = SymplecticFrame::def41(1);
  const int N = 5;
  auto H1 = GroupExponent::make(WeylSeries(1, N + 1), random_homogeneous_base(rng, 1, N + 1, 3, 3), frame, N);
  RatMatrix C = random_symplectic(rng, 1);
  LinearLift L1{C, H1};
  LinearLift id{RatMatrix::identity(2), GroupExponent::zero(frame, N)};
  EXPECT_EQ(lift_compose_cocycle(L1, id), H1);
  LinearLift a{C.inverse(), GroupExponent::zero(frame, N)};
  LinearLift b{C, GroupExponent::zero(frame, N)};
  auto H = lift_compose_cocycle(a, b);
  EXPECT_EQ(H, GroupExponent::zero(frame, N));
  EXPECT_EQ(lift_compose(a, b).C, RatMatrix::identity(2));
}

TEST(Cocycle, ActionOnGenerators) {
  Rng rng(449);
  for (int n = 1; n <= 2; ++n) {
    auto frame = SymplecticFrame::def41(n);
    const int N = 5;
    auto random_lift = [&] {
      auto f = random_homogeneous_base(rng, n, N + 1, 3, 2);
      return LinearLift{random_symplectic(rng, n, 2), GroupExponent::make(WeylSeries(n, N + 1), f, frame, N)};
    };
    for (int t = 0; t < 2; ++t) {
      auto L1 = random_lift();
      auto L2 = random_lift();
      auto L3 = random_lift();
      auto L12 = lift_compose(L1, L2);
      auto left = lift_compose(L12, L3);
      auto right = lift_compose(L1, lift_compose(L2, L3));
      EXPECT_EQ(left.C, right.C);
      for (int i = 0; i < 2 * n; ++i)
        for (auto gen : {WeylSeries::fiber(n, N, i), WeylSeries::base(n, N, i)}) {
          auto direct = lift_apply(L1, lift_apply(L2, gen));
          EXPECT_EQ(lift_apply(L12, gen), direct);
          auto triple = lift_apply(L1, lift_apply(L2, lift_apply(L3, gen)));
          EXPECT_EQ(lift_apply(left, gen), triple);
          EXPECT_EQ(lift_apply(right, gen), triple);
        }
    }
  }
}

TEST(Cocycle, ProjectionRecoversBaseMap) {
  Rng rng(457);
  auto frame = SymplecticFrame::def41(2);
  const int N = 5;
  RatMatrix C = random_symplectic(rng, 2);
  LinearLift L{C, GroupExponent::make(WeylSeries(2, N + 1), random_homogeneous_base(rng, 2, N + 1, 3, 3), frame, N)};
  for (int i = 0; i < 4; ++i) {
    auto img = lift_apply(L, weyl_continuation(WeylSeries::base(2, N, i), frame));
    auto classical = nu_coefficient(fiber_zero_part(img), 0);
    WeylSeries expect(2, N);
    for (int k = 0; k < 4; ++k) expect += WeylSeries::base(2, N, k) * C(i, k);
    EXPECT_EQ(classical, expect);
  }
  // Kernel elements: identity base map, pure exponent.
  LinearLift K{RatMatrix::identity(4), L.H};
  auto g = WeylSeries::fiber(2, N, 0);
  EXPECT_EQ(lift_apply(K, g), ad_exp_apply(L.H, g));
}

TEST(Cocycle, RejectsNonSymplectic) {
  auto frame = SymplecticFrame::def41(1);
  LinearLift a{RatMatrix{{2, 0}, {0, 1}}, GroupExponent::zero(frame, 3)};
  EXPECT_THROW(lift_compose_cocycle(a, a), DomainError);
}

TEST(Contact, AffineMap) {
  auto frame = SymplecticFrame::def41(1);
  auto x = zv(1, 0);
  auto y = zv(1, 1);
  auto phi = PolySymplectomorphism::make({x + y + cst(1, 2), y + cst(1, Rational(-1, 3))}, frame);
  auto h = contact_h0(phi, frame);
  for (int i = 0; i < 2; ++i) {
    const auto& p = phi.components[static_cast<std::size_t>(i)];
    WeylSeries euler(1, 0);
    for (int l = 0; l < 2; ++l) euler += pointwise_product(WeylSeries::base(1, 0, l), d_base(p.with_trunc(0), l));
    EXPECT_EQ(oracle::poisson(h, p.with_trunc(0), frame), p.with_trunc(0) - euler);
  }
  EXPECT_TRUE(contact_h0(PolySymplectomorphism::identity(frame), frame).is_zero());
}
