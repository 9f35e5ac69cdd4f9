#pragma once

#include <bit>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "starforge/fedosov.hpp"
#include "starforge/group_bch.hpp"
#include "starforge/weyl_functions.hpp"

namespace starforge {

struct SymplecticReport {
  bool ok = true;
  // 1-based index pairs (i < j) whose bracket differs from Lambda^{ij}.
  std::vector<std::pair<int, int>> violations;
};

inline SymplecticReport check_symplectic(const std::vector<BasePolynomial>& phi, const SymplecticFrame& frame) {
  if (static_cast<int>(phi.size()) != frame.vars()) throw DimensionMismatch("map needs 2n components");
  SymplecticReport rep;
  for (int i = 0; i < frame.vars(); ++i) {
    require_base_only(phi[static_cast<std::size_t>(i)], "map component");
    for (int j = i + 1; j < frame.vars(); ++j) {
      auto b = poisson_bracket(phi[static_cast<std::size_t>(i)], phi[static_cast<std::size_t>(j)], frame);
      b -= WeylSeries::constant(frame.dim_n(), b.trunc(), frame.lambda(i, j));
      if (!b.is_zero()) {
        rep.ok = false;
        rep.violations.emplace_back(i + 1, j + 1);
      }
    }
  }
  return rep;
}

struct PolySymplectomorphism {
  int dim_n = 1;
  std::vector<BasePolynomial> components;
  SymplecticReport certificate;

  static PolySymplectomorphism make(const std::vector<BasePolynomial>& comps, const SymplecticFrame& frame) {
    PolySymplectomorphism p;
    p.dim_n = frame.dim_n();
    p.components = comps;
    p.certificate = check_symplectic(comps, frame);
    if (!p.certificate.ok) {
      auto [i, j] = p.certificate.violations.front();
      throw DomainError("map is not symplectic: bracket of components " + std::to_string(i) + " and " +
                        std::to_string(j) + " is wrong");
    }
    return p;
  }

  static PolySymplectomorphism identity(const SymplecticFrame& frame, int N = 0) {
    std::vector<BasePolynomial> c;
    for (int i = 0; i < frame.vars(); ++i) c.push_back(WeylSeries::base(frame.dim_n(), N, i));
    return make(c, frame);
  }

  static PolySymplectomorphism linear(const RatMatrix& A, const SymplecticFrame& frame, int N = 0) {
    if (A.rows() != frame.vars() || A.cols() != frame.vars()) throw DimensionMismatch("matrix must be 2n x 2n");
    std::vector<BasePolynomial> c;
    for (int i = 0; i < frame.vars(); ++i) {
      BasePolynomial p(frame.dim_n(), N);
      for (int k = 0; k < frame.vars(); ++k) p += WeylSeries::base(frame.dim_n(), N, k) * A(i, k);
      c.push_back(p);
    }
    return make(c, frame);
  }

  // Degree at most one in z.
  bool is_affine() const {
    for (const auto& c : components)
      for (const auto& [m, x] : c.terms())
        if (m.base_degree() > 1 || m.nu > 0) return false;
    return true;
  }

  // Jacobian of an affine map.
  RatMatrix linear_part() const {
    if (!is_affine()) throw DomainError("map is not affine");
    const int v = 2 * dim_n;
    RatMatrix A(v, v);
    for (int i = 0; i < v; ++i)
      for (int k = 0; k < v; ++k) {
        Monomial m;
        m.base[static_cast<std::size_t>(k)] = 1;
        A(i, k) = components[static_cast<std::size_t>(i)].coeff(m);
      }
    return A;
  }
};

// Odd-order defects a_{(2l+1)}^{st}: [phi^s#, phi^t#] = nu Lambda^{st} + sum_l nu^{2l+1} a_{(2l+1)}^{st}.
struct DefectTable {
  int N = 3;
  std::map<int, std::vector<std::vector<BasePolynomial>>> orders;

  bool zero_at(int order) const {
    for (const auto& row : orders.at(order))
      for (const auto& a : row)
        if (!a.is_zero()) return false;
    return true;
  }
  bool is_zero() const {
    for (const auto& [o, t] : orders)
      if (!zero_at(o)) return false;
    return true;
  }
  // 0 when there is no defect through N.
  int lowest_order() const {
    for (const auto& [o, t] : orders)
      if (!zero_at(o)) return o;
    return 0;
  }
};

namespace detail {

inline std::vector<BasePolynomial> classical_part(const std::vector<BasePolynomial>& phi) {
  std::vector<BasePolynomial> r;
  for (const auto& p : phi) r.push_back(nu_coefficient(p, 0));
  return r;
}

}  // namespace detail

// Components may carry even powers of nu (corrected maps); the classical part must be symplectic.
inline DefectTable ccr_defect(const std::vector<BasePolynomial>& phi, int N, const SymplecticFrame& frame) {
  if (N < 3) throw DomainError("ccr_defect needs N >= 3");
  auto rep = check_symplectic(detail::classical_part(phi), frame);
  if (!rep.ok) throw DomainError("ccr_defect: map is not symplectic");
  const int v = frame.vars();
  const int T = 2 * N;
  std::vector<BasePolynomial> p;
  for (const auto& c : phi) {
    if (!is_even_in_nu(c)) throw DomainError("map components must be even in nu");
    p.push_back(c.with_trunc(T));
  }
  DefectTable tab;
  tab.N = N;
  for (int o = 3; o <= N; o += 2)
    tab.orders[o] = std::vector<std::vector<BasePolynomial>>(
        static_cast<std::size_t>(v), std::vector<BasePolynomial>(static_cast<std::size_t>(v), WeylSeries(frame.dim_n(), T)));
  for (int s = 0; s < v; ++s)
    for (int t = s + 1; t < v; ++t) {
      const auto& a = p[static_cast<std::size_t>(s)];
      const auto& b = p[static_cast<std::size_t>(t)];
      auto c = base_star(a, b, frame) - base_star(b, a, frame);
      for (const auto& [m, x] : c.terms())
        if (m.nu % 2 == 0) throw DomainError("internal error: even nu order in a star commutator");
      for (int o = 3; o <= N; o += 2) {
        auto coeff = nu_coefficient(c, o);
        tab.orders[o][static_cast<std::size_t>(s)][static_cast<std::size_t>(t)] = coeff;
        tab.orders[o][static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] = -coeff;
      }
    }
  return tab;
}

inline DefectTable ccr_defect(const PolySymplectomorphism& phi, int N, const SymplecticFrame& frame) {
  return ccr_defect(phi.components, N, frame);
}

struct ClosednessReport {
  // phi^* omega' = 1/2 omega_{su} omega_{tv} a^{uv} dphi^s ^ dphi^t, a 2-form in the source coordinates.
  FormSection omega_pullback;
  FormSection d_omega;
  bool closed = true;
  // {phi^s, a^{tu}} + cyclic = 0 for all s, t, u.
  bool jacobi = true;
};

namespace detail {

inline constexpr int kFormTrunc = 64;

inline FormSection assemble_pullback(const std::vector<std::vector<BasePolynomial>>& a,
                                     const std::vector<BasePolynomial>& phi0, const SymplecticFrame& frame) {
  const int v = frame.vars();
  const int n = frame.dim_n();
  std::vector<FormSection> dphi;
  for (const auto& p : phi0) dphi.push_back(exterior_d(p.with_trunc(kFormTrunc)));
  FormSection out(n, kFormTrunc);
  for (int s = 0; s < v; ++s)
    for (int t = 0; t < v; ++t) {
      BasePolynomial w(n, kFormTrunc);
      for (int u = 0; u < v; ++u)
        for (int x = 0; x < v; ++x) {
          Rational c = frame.omega(s, u) * frame.omega(t, x);
          if (c == 0) continue;
          w += a[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)].with_trunc(kFormTrunc) * c;
        }
      if (w.is_zero()) continue;
      out += pointwise_product(w, pointwise_product(dphi[static_cast<std::size_t>(s)], dphi[static_cast<std::size_t>(t)])) *
             Rational(1, 2);
    }
  return out;
}

}  // namespace detail

inline ClosednessReport closedness_audit(const std::vector<std::vector<BasePolynomial>>& a,
                                         const std::vector<BasePolynomial>& phi, const SymplecticFrame& frame) {
  const int v = frame.vars();
  if (static_cast<int>(a.size()) != v) throw DimensionMismatch("defect matrix must be 2n x 2n");
  auto phi0 = detail::classical_part(phi);
  ClosednessReport rep;
  rep.omega_pullback = detail::assemble_pullback(a, phi0, frame);
  rep.d_omega = exterior_d(rep.omega_pullback);
  rep.closed = rep.d_omega.is_zero();
  for (int s = 0; s < v && rep.jacobi; ++s)
    for (int t = 0; t < v && rep.jacobi; ++t)
      for (int u = 0; u < v && rep.jacobi; ++u) {
        auto br = [&](int i, int j, int k) {
          return poisson_bracket(phi0[static_cast<std::size_t>(i)].with_trunc(detail::kFormTrunc),
                                 a[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].with_trunc(detail::kFormTrunc),
                                 frame);
        };
        if (!(br(s, t, u) + br(t, u, s) + br(u, s, t)).is_zero()) rep.jacobi = false;
      }
  return rep;
}

inline ClosednessReport closedness_audit(const DefectTable& tab, const std::vector<BasePolynomial>& phi,
                                         const SymplecticFrame& frame, int order = 3) {
  return closedness_audit(tab.orders.at(order), phi, frame);
}

// Radial homotopy on base forms: for a k-form with coefficient of degree d, z^i i(d/dz^i) / (d + k).
inline FormSection homotopy_primitive(const FormSection& a) {
  FormSection r(a.dim_n(), a.trunc());
  for (const auto& [m, c] : a.terms()) {
    if (m.fiber_degree() != 0) throw DomainError("homotopy_primitive expects base forms");
    const int k = m.form_degree();
    if (k == 0) continue;
    const Rational w = c / (m.base_degree() + k);
    const auto one = WeylSeries::term(a.dim_n(), a.trunc(), m, w);
    for (int i = 0; i < a.vars(); ++i) {
      if (!(m.forms & (1u << i))) continue;
      r += pointwise_product(WeylSeries::base(a.dim_n(), a.trunc(), i), interior(one, i));
    }
  }
  return r;
}

struct LiftCorrections {
  // Power 2p of nu -> g_p^1 .. g_p^{2n}.
  std::map<int, std::vector<BasePolynomial>> by_order;

  bool is_zero() const {
    for (const auto& [o, g] : by_order)
      for (const auto& p : g)
        if (!p.is_zero()) return false;
    return true;
  }

  // phi^i + sum nu^{2p} g_p^i.
  std::vector<BasePolynomial> apply(const std::vector<BasePolynomial>& phi) const {
    std::vector<BasePolynomial> out = phi;
    for (const auto& [o, g] : by_order)
      for (std::size_t i = 0; i < out.size(); ++i) {
        const int T = std::max(out[i].trunc(), 2 * o);
        out[i] = out[i].with_trunc(T) + shift_nu(g[i], o, T);
      }
    return out;
  }
};

// Kills the odd defects through nu^N one order at a time.
inline LiftCorrections ccr_repair(const PolySymplectomorphism& phi, int N, const SymplecticFrame& frame) {
  const int v = frame.vars();
  const int n = frame.dim_n();
  const auto& phi0 = phi.components;
  // J^{-1} = Lambda J^T omega for a symplectic Jacobian.
  std::vector<std::vector<BasePolynomial>> jinv(static_cast<std::size_t>(v),
                                                std::vector<BasePolynomial>(static_cast<std::size_t>(v), WeylSeries(n, detail::kFormTrunc)));
  for (int k = 0; k < v; ++k)
    for (int m = 0; m < v; ++m)
      for (int a = 0; a < v; ++a)
        for (int b = 0; b < v; ++b) {
          Rational c = frame.lambda(k, a) * frame.omega(b, m);
          if (c == 0) continue;
          jinv[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)] +=
              d_base(phi0[static_cast<std::size_t>(b)].with_trunc(detail::kFormTrunc), a) * c;
        }

  LiftCorrections out;
  if (N < 3) return out;
  for (int o = 3; o <= N; o += 2) {
    auto current = out.apply(phi0);
    auto tab = ccr_defect(current, o, frame);
    if (tab.zero_at(o)) continue;
    auto audit = closedness_audit(tab.orders.at(o), phi0, frame);
    if (!audit.closed) throw DomainError("internal error: defect 2-form is not closed at order " + std::to_string(o));
    auto beta = -homotopy_primitive(audit.omega_pullback);
    std::vector<BasePolynomial> B(static_cast<std::size_t>(v), WeylSeries(n, detail::kFormTrunc));
    for (int k = 0; k < v; ++k) {
      auto bk = interior(beta, k);
      if (bk.is_zero()) continue;
      for (int m = 0; m < v; ++m)
        B[static_cast<std::size_t>(m)] += pointwise_product(bk, jinv[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)]);
    }
    std::vector<BasePolynomial> g;
    for (int t = 0; t < v; ++t) {
      BasePolynomial acc(n, detail::kFormTrunc);
      for (int m = 0; m < v; ++m)
        if (frame.lambda(t, m) != 0) acc += B[static_cast<std::size_t>(m)] * frame.lambda(t, m);
      g.push_back(acc.with_trunc(0));
    }
    out.by_order[o - 1] = g;
  }
  return out;
}

// ---- MCW lift equation on the flat chart, for unipotent linear maps and constant-coefficient gamma.

namespace detail {

inline void require_constant_coefficients(const FormSection& a, const char* what) {
  for (const auto& [m, c] : a.terms()) {
    if (m.base_degree() != 0) throw DomainError(std::string(what) + " must have constant coefficients");
    if (m.form_degree() > 1) throw DomainError(std::string(what) + " must be a 1-form");
  }
}

// Pullback of forms by z -> B z: dz^i -> B^i_k dz^k (form degree <= 1).
inline FormSection pull_forms(const FormSection& a, const RatMatrix& B) {
  FormSection r(a.dim_n(), a.trunc());
  for (const auto& [m, c] : a.terms()) {
    if (m.forms == 0) {
      r.add(m, c);
      continue;
    }
    const int i = std::countr_zero(m.forms);
    for (int k = 0; k < a.vars(); ++k) {
      if (B(i, k) == 0) continue;
      Monomial x = m;
      x.forms = static_cast<std::uint16_t>(1u << k);
      r.add(x, c * B(i, k));
    }
  }
  return r;
}

inline FormSection fiber_dependent(const FormSection& a) {
  FormSection r(a.dim_n(), a.trunc());
  for (const auto& [m, c] : a.terms())
    if (m.fiber_degree() > 0) r.add(m, c);
  return r;
}

struct McwSetup {
  SymplecticFrame frame;
  RatMatrix A;
  FormSection gamma;
  FormSection rhs;  // G - psi^* G with G = -theta + gamma
  int N;
};

inline McwSetup mcw_setup(const PolySymplectomorphism& phi, const FormSection& gamma, int N,
                          const SymplecticFrame& frame) {
  if (N < 2) throw DomainError("mcw_lift_solve needs N >= 2");
  if (gamma.dim_n() != frame.dim_n()) throw DimensionMismatch("gamma dim_n differs from frame");
  require_constant_coefficients(gamma, "gamma");
  if (!phi.is_affine()) throw DomainError("mcw_lift_solve supports affine maps only");
  McwSetup s{frame, phi.linear_part(), gamma.with_trunc(N - 1), FormSection(frame.dim_n(), N - 1), N};
  const auto G = -theta_form(frame, N - 1) + s.gamma;
  s.rhs = G - pull_forms(G, s.A.inverse());
  return s;
}

// sum_{k>=1} 1/k! ad(F/nu)^{k-1} (nabla^W F) with nabla^W = -delta + ad(gamma/nu) on constant sections.
inline FormSection mcw_lhs(const WeylSeries& F, const McwSetup& s) {
  const int M = s.N - 1;
  auto Ft = F.with_trunc(M);
  FormSection term = -delta(F, s.frame).with_trunc(M) + ad_nu(s.gamma, Ft, s.frame, M);
  FormSection sum = term;
  for (int k = 2; !term.is_zero(); ++k) {
    if (k > 8 * (M + 2)) throw DomainError("internal error: ad series of F does not terminate");
    term = ad_nu(Ft, term, s.frame, M) * Rational(1, k);
    sum += term;
  }
  return sum;
}

// Quadratic F2 with exp(ad(F2/nu)) Z = A Z, for unipotent A.
inline WeylSeries unipotent_log_generator(const RatMatrix& A, const SymplecticFrame& frame, int N) {
  const int v = frame.vars();
  const RatMatrix I = RatMatrix::identity(v);
  const RatMatrix U = A - I;
  RatMatrix P = I;
  for (int k = 0; k < v; ++k) P = P * U;
  if (!P.is_zero()) throw DomainError("mcw_lift_solve supports unipotent linear parts only");
  RatMatrix X(v, v);
  P = I;
  for (int k = 1; k <= v; ++k) {
    P = P * U;
    X = X + P * Rational(k % 2 ? 1 : -1, k);
  }
  const RatMatrix S = -(frame.omega() * X);
  if (!S.is_symmetric()) throw DomainError("linear part is not symplectic");
  WeylSeries F(frame.dim_n(), N);
  for (int i = 0; i < v; ++i)
    for (int j = 0; j < v; ++j) {
      if (S(i, j) == 0) continue;
      Monomial m;
      ++m.fiber[static_cast<std::size_t>(i)];
      ++m.fiber[static_cast<std::size_t>(j)];
      F.add(m, S(i, j) / 2);
    }
  return F;
}

inline std::vector<Monomial> fiber_monomials_of_weight(int vars, int w) {
  std::vector<Monomial> out;
  for (int l = 0; 2 * l < w; ++l) {
    const int p = w - 2 * l;
    MultiIndex a{};
    std::function<void(int, int)> rec = [&](int i, int left) {
      if (i == vars - 1) {
        a[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(left);
        Monomial m;
        m.nu = l;
        m.fiber = a;
        out.push_back(m);
        return;
      }
      for (int e = 0; e <= left; ++e) {
        a[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(e);
        rec(i + 1, left - e);
      }
    };
    rec(0, p);
  }
  return out;
}

}  // namespace detail

// Fiber-dependent part of LHS - RHS of the lift equation (multiplied by nu), through d-degree N - 1.
inline FormSection mcw_residual(const WeylSeries& F, const PolySymplectomorphism& phi, const FormSection& gamma, int N,
                                const SymplecticFrame& frame) {
  auto s = detail::mcw_setup(phi, gamma, N, frame);
  return detail::fiber_dependent(detail::mcw_lhs(F.with_trunc(N), s) - s.rhs);
}

// Exponent F (fiber-dependent, trunc N) of the lift phi^* o exp(ad(F/nu)) intertwining nabla^W.
inline WeylSeries mcw_lift_solve(const PolySymplectomorphism& phi, const FormSection& gamma, int N,
                                 const SymplecticFrame& frame) {
  auto s = detail::mcw_setup(phi, gamma, N, frame);
  WeylSeries F = detail::unipotent_log_generator(s.A, frame, N);
  auto low = detail::fiber_dependent(detail::mcw_lhs(F, s) - s.rhs);
  if (!degree_part(low, 1).is_zero()) throw CcrViolation("lift equation unresolved", 2);
  for (int w = 3; w <= N; ++w) {
    auto res = degree_part(detail::fiber_dependent(detail::mcw_lhs(F, s) - s.rhs), w - 1);
    if (res.is_zero()) continue;
    const auto basis = detail::fiber_monomials_of_weight(frame.vars(), w);
    auto base_lhs = detail::mcw_lhs(F, s);
    std::vector<FormSection> cols;
    std::map<Monomial, int> rows;
    for (const auto& m : basis) {
      auto u = WeylSeries::term(frame.dim_n(), N, m, 1);
      auto col = degree_part(detail::fiber_dependent(detail::mcw_lhs(F + u, s) - base_lhs), w - 1);
      for (const auto& [k, c] : col.terms()) rows.try_emplace(k, static_cast<int>(rows.size()));
      cols.push_back(col);
    }
    for (const auto& [k, c] : res.terms()) rows.try_emplace(k, static_cast<int>(rows.size()));
    RatMatrix M(static_cast<int>(rows.size()), static_cast<int>(basis.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
      for (const auto& [k, c] : cols[j].terms()) M(rows.at(k), static_cast<int>(j)) = c;
    std::vector<Rational> b(rows.size());
    for (const auto& [k, c] : res.terms()) b[static_cast<std::size_t>(rows.at(k))] = -c;
    std::vector<Rational> x;
    if (!M.solve(b, x)) throw CcrViolation("lift equation unresolved", w);
    for (std::size_t j = 0; j < basis.size(); ++j) F.add(basis[j], x[j]);
  }
  if (!mcw_residual(F, phi, gamma, N, frame).is_zero())
    throw DomainError("internal error: lift equation residual is nonzero");
  return F;
}

// ---- Composition cocycle on the linear subgroup.

// Psi = P_C o exp(ad(H/nu)) with P_C(sigma)(z, Z) = sigma(C z, C Z).
struct LinearLift {
  RatMatrix C;
  GroupExponent H;
};

namespace detail {

inline void require_symplectic_matrix(const RatMatrix& C, const SymplecticFrame& frame) {
  if (C.rows() != frame.vars() || C.cols() != frame.vars()) throw DimensionMismatch("matrix must be 2n x 2n");
  if (!(C * frame.lambda() * C.transpose() == frame.lambda())) throw DomainError("base map is not linear symplectic");
}

inline WeylSeries substitute_both(const WeylSeries& a, const RatMatrix& C) {
  return linear_substitute(linear_substitute(a, C, true), C, false);
}

}  // namespace detail

inline WeylSeries lift_apply(const LinearLift& L, const WeylSeries& sigma) {
  detail::require_symplectic_matrix(L.C, L.H.frame);
  return detail::substitute_both(ad_exp_apply(L.H, sigma), L.C);
}

// H with Psi1 o Psi2 = P_{C2 C1} o exp(ad(H/nu)): H = BCH(P_{C2}^{-1} H1, H2).
inline GroupExponent lift_compose_cocycle(const LinearLift& L1, const LinearLift& L2) {
  const auto& frame = L1.H.frame;
  detail::require_symplectic_matrix(L1.C, frame);
  detail::require_symplectic_matrix(L2.C, frame);
  const RatMatrix Ci = L2.C.inverse();
  auto H1 = GroupExponent::make(linear_substitute(L1.H.g_part, Ci, false), linear_substitute(L1.H.f_part, Ci, false),
                                frame, L1.H.trunc_N);
  return bch_compose(H1, L2.H);
}

inline LinearLift lift_compose(const LinearLift& L1, const LinearLift& L2) {
  return LinearLift{L2.C * L1.C, lift_compose_cocycle(L1, L2)};
}

// nu^1 contact equation for affine phi: {h0, phi^i} = phi^i - z^l d_l phi^i, solved with h0 linear.
inline BasePolynomial contact_h0(const PolySymplectomorphism& phi, const SymplecticFrame& frame) {
  const RatMatrix A = phi.linear_part();
  const int v = frame.vars();
  const int n = frame.dim_n();
  // {c_k z^k, A^i_m z^m} = c_k Lambda^{km} A^i_m.
  RatMatrix M(v, v);
  std::vector<Rational> b(static_cast<std::size_t>(v));
  for (int i = 0; i < v; ++i) {
    b[static_cast<std::size_t>(i)] = phi.components[static_cast<std::size_t>(i)].coeff(Monomial{});
    for (int k = 0; k < v; ++k)
      for (int m = 0; m < v; ++m) M(i, k) += frame.lambda(k, m) * A(i, m);
  }
  std::vector<Rational> c;
  if (!M.solve(b, c)) throw DomainError("contact equation has no linear solution");
  BasePolynomial h(n, 0);
  for (int k = 0; k < v; ++k) h += WeylSeries::base(n, 0, k) * c[static_cast<std::size_t>(k)];
  return h;
}

}  // namespace starforge
