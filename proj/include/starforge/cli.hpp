#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "starforge/dgla.hpp"
#include "starforge/expression.hpp"
#include "starforge/fedosov.hpp"
#include "starforge/group_bch.hpp"
#include "starforge/lift.hpp"
#include "starforge/random.hpp"
#include "starforge/seminorm.hpp"
#include "starforge/star_exp.hpp"

namespace starforge::cli {

using Json = nlohmann::ordered_json;

struct RunConfig {
  int n = 1;
  int trunc_N = 6;
  std::string lambda = "def41";
  int grid = kDefaultGrid;
  std::string format = "text";
  std::uint64_t seed = 1;
  std::string out;
};

// ---- serialization

inline Rational rational_from_json(const Json& j) {
  if (j.is_number_integer()) return Rational(mpz_class(j.get<long>()));
  if (j.is_string()) return parse_rational(j.get<std::string>());
  throw DomainError("expected an integer or a \"p/q\" string");
}

inline RatMatrix parse_matrix(const std::string& src) {
  Json j;
  try {
    j = Json::parse(src);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("bad matrix literal: ") + e.what(), 1, static_cast<int>(e.byte));
  }
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ParseError("matrix must be a list of rows", 1, 1);
  RatMatrix m(static_cast<int>(j.size()), static_cast<int>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != j[0].size()) throw ParseError("ragged matrix literal", 1, 1);
    for (std::size_t k = 0; k < j[i].size(); ++k)
      m(static_cast<int>(i), static_cast<int>(k)) = rational_from_json(j[i][k]);
  }
  return m;
}

inline SymplecticFrame make_frame(const RunConfig& cfg) {
  if (cfg.n < 1) throw DomainError("n must be at least 1");
  if (cfg.lambda == "def41") return SymplecticFrame::def41(cfg.n);
  if (cfg.lambda == "appendix62") return SymplecticFrame::appendix62(cfg.n);
  auto frame = SymplecticFrame::from_lambda(parse_matrix(cfg.lambda));
  if (frame.dim_n() != cfg.n) throw DimensionMismatch("explicit lambda size differs from 2n");
  return frame;
}

inline Json exponents_json(const MultiIndex& a, int vars) {
  Json e = Json::array();
  for (int i = 0; i < vars; ++i) e.push_back(static_cast<int>(a[static_cast<std::size_t>(i)]));
  return e;
}

inline Json to_json(const WeylSeries& f) {
  Json terms = Json::array();
  for (const auto& [m, c] : f.terms()) {
    Json forms = Json::array();
    for (int i = 0; i < f.vars(); ++i)
      if (m.forms & (1u << i)) forms.push_back(i + 1);
    terms.push_back(Json{{"coeff", c.get_str()},
                         {"nu", m.nu},
                         {"z", exponents_json(m.base, f.vars())},
                         {"Z", exponents_json(m.fiber, f.vars())},
                         {"dz", forms}});
  }
  return Json{{"n", f.dim_n()}, {"trunc_N", f.trunc()}, {"text", f.str()}, {"terms", terms}};
}

inline Json to_json(const RatMatrix& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (int k = 0; k < m.cols(); ++k) r.push_back(m(i, k).get_str());
    rows.push_back(r);
  }
  return rows;
}

inline Json to_json(const Poly& p) {
  Json terms = Json::array();
  for (const auto& [a, c] : p.terms()) terms.push_back(Json{{"coeff", c.get_str()}, {"exp", exponents_json(a, p.dim())}});
  return terms;
}

inline Json to_json(const PolyDiffOp& op) {
  Json terms = Json::array();
  for (const auto& [key, c] : op.terms()) {
    Json derivs = Json::array();
    for (const auto& a : key) derivs.push_back(exponents_json(a, op.dim()));
    terms.push_back(Json{{"coeff", to_json(c)}, {"derivs", derivs}});
  }
  return terms;
}

inline MultiIndex multi_index_from_json(const Json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw DomainError("multi-index length must equal dim");
  MultiIndex a{};
  for (int i = 0; i < dim; ++i) {
    const int e = j[static_cast<std::size_t>(i)].get<int>();
    if (e < 0 || e > 255) throw DomainError("multi-index entry out of range");
    a[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(e);
  }
  return a;
}

inline Poly poly_from_json(const Json& j, int dim) {
  Poly p(dim);
  for (const auto& t : j) p.add(multi_index_from_json(t.at("exp"), dim), rational_from_json(t.at("coeff")));
  return p;
}

inline PolyDiffOp op_from_json(const Json& j, int dim, int degree) {
  PolyDiffOp op(dim, degree);
  for (const auto& t : j) {
    PolyDiffOp::Key key;
    for (const auto& a : t.at("derivs")) key.push_back(multi_index_from_json(a, dim));
    op.add(key, poly_from_json(t.at("coeff"), dim));
  }
  return op;
}

// {"dim": d, "order_N": N, "test_degree": k, "B": {"1": [...], "2": [...]}}
inline Json cochains_json(const std::map<int, PolyDiffOp>& B, int dim, int order_N) {
  Json b = Json::object();
  for (const auto& [o, op] : B) b[std::to_string(o)] = to_json(op);
  return Json{{"dim", dim}, {"order_N", order_N}, {"B", b}};
}

// ---- audits

struct AuditResult {
  bool pass = true;
  std::vector<std::string> rows;
  Json detail = Json::array();

  void row(bool ok, const std::string& text, Json extra = Json::object()) {
    pass = pass && ok;
    rows.push_back(text + (ok ? "  ok" : "  FAIL"));
    extra["ok"] = ok;
    detail.push_back(std::move(extra));
  }
};

struct AuditOptions {
  int count = 10;
  int K = 4;
};

namespace detail {

inline std::string pair_label(int i, int j) { return "[Z" + std::to_string(i + 1) + ",Z" + std::to_string(j + 1) + "]"; }

inline AuditResult audit_ccr(const SymplecticFrame& frame, int N, Rng&, const AuditOptions&) {
  AuditResult r;
  const int n = frame.dim_n();
  for (int i = 0; i < frame.vars(); ++i)
    for (int j = 0; j < frame.vars(); ++j) {
      auto c = star_commutator(WeylSeries::fiber(n, N, i), WeylSeries::fiber(n, N, j), frame);
      auto expect = WeylSeries::nu(n, N) * frame.lambda(i, j);
      r.row(c == expect, pair_label(i, j) + " = " + c.str(), Json{{"i", i + 1}, {"j", j + 1}, {"value", c.str()}});
    }
  return r;
}

inline AuditResult audit_assoc(const SymplecticFrame& frame, int N, Rng& rng, const AuditOptions& opt) {
  AuditResult r;
  const int n = frame.dim_n();
  for (int t = 0; t < opt.count; ++t) {
    SeriesShape shape{4, 4, 1, 0};
    auto f = random_series(rng, n, N, shape), g = random_series(rng, n, N, shape), h = random_series(rng, n, N, shape);
    auto d = moyal_product(moyal_product(f, g, frame), h, frame) - moyal_product(f, moyal_product(g, h, frame), frame);
    r.row(d.is_zero(), "triple " + std::to_string(t + 1) + " (" + std::to_string(f.size()) + ", " + std::to_string(g.size()) +
                           ", " + std::to_string(h.size()) + " terms): defect " + d.str(),
          Json{{"triple", t + 1}, {"f", f.str()}, {"g", g.str()}, {"h", h.str()}, {"defect", d.str()}});
  }
  return r;
}

inline AuditResult audit_axioms(const SymplecticFrame& frame, int N, Rng& rng, const AuditOptions& opt) {
  AuditResult r;
  const int n = frame.dim_n();
  const int T = std::max(N, 2);
  for (int t = 0; t < opt.count; ++t) {
    auto f = random_homogeneous_base(rng, n, T, 2, 3), g = random_homogeneous_base(rng, n, T, 2, 3);
    auto fg = recaptured_star(f, g, frame), gf = recaptured_star(g, f, frame);
    const bool ok0 = nu_coefficient(fg, 0) == pointwise_product(f, g);
    const bool ok1 = (nu_coefficient(fg, 1) - nu_coefficient(gf, 1)) * Rational(1, 2) ==
                     poisson_bracket(f, g, frame) * Rational(1, 2);
    r.row(ok0 && ok1, "pair " + std::to_string(t + 1) + ": nu^0 " + (ok0 ? "pointwise" : "differs") + ", nu^1 " +
                          (ok1 ? "half Poisson" : "differs"),
          Json{{"pair", t + 1}});
  }
  return r;
}

inline GroupExponent random_group_exponent(Rng& rng, const SymplecticFrame& frame, int N) {
  const int n = frame.dim_n();
  auto f = random_base_poly(rng, n, N + 1, 4, 3);
  WeylSeries g(n, N + 1);
  g.add(Monomial{}, rng.rational());
  return GroupExponent::make(g, f, frame, N);
}

inline AuditResult audit_bch(const SymplecticFrame& frame, int N, Rng& rng, const AuditOptions& opt) {
  AuditResult r;
  for (int t = 0; t < opt.count; ++t) {
    auto H1 = random_group_exponent(rng, frame, N), H2 = random_group_exponent(rng, frame, N);
    auto H = bch_compose(H1, H2);
    bool ok = true;
    for (int i = 0; i < frame.vars(); ++i) {
      auto z = WeylSeries::fiber(frame.dim_n(), N, i);
      ok = ok && ad_exp_apply(H, z) == ad_exp_apply(H1, ad_exp_apply(H2, z));
    }
    r.row(ok, "pair " + std::to_string(t + 1) + ": composite action", Json{{"pair", t + 1}});
  }
  return r;
}

inline AuditResult audit_factorize(const SymplecticFrame& frame, int N, Rng& rng, const AuditOptions& opt) {
  AuditResult r;
  const int n = frame.dim_n();
  for (int t = 0; t < opt.count; ++t) {
    auto A = random_symplectic(rng, n);
    // Sp is the same group for both built-in conventions; an explicit lambda may differ.
    if (!(A.transpose() * frame.omega() * A == frame.omega())) A = RatMatrix::identity(2 * n);
    auto F = random_exponent(rng, n, N + 1, 3, 5, 4);
    auto data = factorize_automorphism(realize_automorphism(A, F, frame, N), frame);
    r.row(data.A == A && data.F_part == F, "case " + std::to_string(t + 1) + ": recovered A and F",
          Json{{"case", t + 1}});
  }
  return r;
}

inline AuditResult audit_starexp(const SymplecticFrame& frame, int, Rng& rng, const AuditOptions& opt) {
  AuditResult r;
  const int n = frame.dim_n();
  for (int t = 0; t < opt.count; ++t) {
    QuadraticForm A(random_symmetric(rng, 2 * n, 2, 2));
    auto a = star_exp_taylor(A, opt.K, frame), b = star_exp_closed(A, opt.K, frame);
    r.row(a == b, "form " + std::to_string(t + 1) + ": taylor = closed through t^" + std::to_string(opt.K),
          Json{{"form", t + 1}, {"A", to_json(A.A)}});
  }
  return r;
}

inline AuditResult audit_cayley(const SymplecticFrame& frame, int, Rng& rng, const AuditOptions& opt) {
  AuditResult r;
  const auto& L = frame.lambda();
  const int v = frame.vars();
  for (int t = 0; t < opt.count; ++t) {
    RatMatrix X = L * random_symmetric(rng, v, 3, 2);
    if (sgn((RatMatrix::identity(v) + X).det()) == 0) {
      r.rows.push_back("matrix " + std::to_string(t + 1) + ": 1 + X singular, skipped");
      continue;
    }
    RatMatrix C = cayley(X);
    r.row(C.transpose() * L * C == L, "matrix " + std::to_string(t + 1) + ": tC Lambda C = Lambda",
          Json{{"matrix", t + 1}, {"C", to_json(C)}});
  }
  return r;
}

inline FormSection random_form_section(Rng& rng, int n, int N, int q) {
  FormSection s(n, N);
  const int v = 2 * n;
  for (int t = 0; t < 8; ++t) {
    Monomial m;
    m.nu = rng.uniform(0, 1);
    const int fd = rng.uniform(0, 3);
    for (int k = 0; k < fd; ++k) ++m.fiber[static_cast<std::size_t>(rng.uniform(0, v - 1))];
    const int bd = rng.uniform(0, 2);
    for (int k = 0; k < bd; ++k) ++m.base[static_cast<std::size_t>(rng.uniform(0, v - 1))];
    while (m.form_degree() < q) m.forms |= static_cast<std::uint16_t>(1u << rng.uniform(0, v - 1));
    s.add(m, rng.nonzero_rational());
  }
  return s;
}

inline AuditResult audit_hodge(const SymplecticFrame& frame, int N, Rng& rng, const AuditOptions& opt) {
  AuditResult r;
  const int n = frame.dim_n();
  for (int t = 0; t < opt.count; ++t) {
    const int q = t % 2;
    auto a = random_form_section(rng, n, N, q);
    auto lhs = delta(delta_inv(a, frame), frame) + delta_inv(delta(a, frame), frame) + central_projection(a);
    r.row(lhs == a, "section " + std::to_string(t + 1) + " (form degree " + std::to_string(q) + ")",
          Json{{"section", t + 1}, {"form_degree", q}});
  }
  return r;
}

inline AuditResult audit_fedosov(const SymplecticFrame& frame, int N, Rng&, const AuditOptions&) {
  AuditResult r;
  const int n = frame.dim_n();
  FormSection R(n, N);
  for (int i = 0; i < n; ++i) {
    Monomial m;
    m.nu = 2;
    m.forms = static_cast<std::uint16_t>((1u << i) | (1u << (n + i)));
    R.add(m, 1);
  }
  const std::vector<std::pair<std::string, FormSection>> battery{{"zero", FormSection(n, N)}, {"constant nu^2", R}};
  for (const auto& [name, curv] : battery) {
    FedosovState s(frame, SymplecticConnection::zero(frame.vars()), curv, N);
    auto rr = fedosov_recursion(s);
    auto d = flatness_defect(s);
    r.row(d.is_zero(), name + ": r = " + rr.str() + ", flatness defect " + d.str(),
          Json{{"curvature", name}, {"r", to_json(rr)}});
  }
  return r;
}

inline std::vector<BasePolynomial> three_shear_map(int T) {
  auto x = WeylSeries::base(1, T, 0), y = WeylSeries::base(1, T, 1);
  auto v = y + pointwise_product(x, x);
  auto u = x + pointwise_product(v, v);
  return {u, v + pointwise_product(u, u)};
}

inline AuditResult audit_lift(const SymplecticFrame& frame, int N, Rng&, const AuditOptions&) {
  AuditResult r;
  if (frame.dim_n() != 1) throw DomainError("the lift audit runs on the n = 1 shear map");
  const int M = std::max(5, N - (N % 2 == 0));
  auto phi = PolySymplectomorphism::make(three_shear_map(0), frame);
  auto tab = ccr_defect(phi, M, frame);
  r.row(tab.lowest_order() == 3, "defect lowest order " + std::to_string(tab.lowest_order()), Json{{"lowest_order", tab.lowest_order()}});
  for (const auto& [o, t] : tab.orders) {
    auto rep = closedness_audit(tab, phi.components, frame, o);
    r.row(rep.closed && rep.jacobi, "order " + std::to_string(o) + ": closed", Json{{"order", o}});
  }
  auto fix = ccr_repair(phi, M, frame);
  auto re = ccr_defect(fix.apply(phi.components), M, frame);
  r.row(re.is_zero(), "repaired through nu^" + std::to_string(M), Json{{"repaired_through", M}});
  auto lin = ccr_repair(PolySymplectomorphism::linear(RatMatrix{{1, 0}, {2, 1}}, frame), M, frame);
  r.row(lin.is_zero(), "linear map needs no correction", Json{{"linear", true}});
  return r;
}

inline AuditResult audit_dgla(const SymplecticFrame& frame, int N, Rng&, const AuditOptions&) {
  AuditResult r;
  const int order = std::min(N, 3);
  auto d = mc_defect_star(moyal_tail_cochains(frame, order), order, frame.dim_n() == 1 ? 3 : 2);
  for (const auto& [o, op] : d.by_order) r.row(op.is_zero(), "nu^" + std::to_string(o) + ": MC defect " + op.str(), Json{{"order", o}});
  return r;
}

inline AuditResult audit_seminorm(const SymplecticFrame& frame, int N, Rng& rng, const AuditOptions& opt, int grid) {
  AuditResult r;
  const int n = frame.dim_n();
  auto K = Box::cube(frame.vars(), -1, 1);
  for (int t = 0; t < opt.count; ++t) {
    auto f = random_base_poly(rng, n, N, 4, 2), g = random_base_poly(rng, n, N, 4, 2);
    auto fg = recaptured_star(f, g, frame);
    bool ok = true;
    for (int i = 0; i <= 4; ++i)
      ok = ok && seminorm(fg, i, K, grid) <= quasi_mult_constant(i, frame) * seminorm(f, i, K, grid) * seminorm(g, i, K, grid);
    r.row(ok, "pair " + std::to_string(t + 1) + ": ||f*g||_i <= C_i ||f||_i ||g||_i for i <= 4", Json{{"pair", t + 1}});
  }
  return r;
}

}  // namespace detail

inline const std::vector<std::string>& audit_kinds() {
  static const std::vector<std::string> kinds{"ccr",   "assoc", "axioms", "bch",  "factorize", "starexp",
                                              "cayley", "hodge", "fedosov", "lift", "dgla",      "seminorm"};
  return kinds;
}

inline AuditResult run_audit(const std::string& kind, const RunConfig& cfg, const AuditOptions& opt) {
  const auto frame = make_frame(cfg);
  const int N = cfg.trunc_N;
  Rng rng(cfg.seed);
  if (kind == "ccr") return detail::audit_ccr(frame, N, rng, opt);
  if (kind == "assoc") return detail::audit_assoc(frame, N, rng, opt);
  if (kind == "axioms") return detail::audit_axioms(frame, N, rng, opt);
  if (kind == "bch") return detail::audit_bch(frame, N, rng, opt);
  if (kind == "factorize") return detail::audit_factorize(frame, N, rng, opt);
  if (kind == "starexp") return detail::audit_starexp(frame, N, rng, opt);
  if (kind == "cayley") return detail::audit_cayley(frame, N, rng, opt);
  if (kind == "hodge") return detail::audit_hodge(frame, N, rng, opt);
  if (kind == "fedosov") return detail::audit_fedosov(frame, N, rng, opt);
  if (kind == "lift") return detail::audit_lift(frame, N, rng, opt);
  if (kind == "dgla") return detail::audit_dgla(frame, N, rng, opt);
  if (kind == "seminorm") return detail::audit_seminorm(frame, N, rng, opt, cfg.grid);
  throw CLI::ValidationError("audit", "unknown audit kind '" + kind + "'");
}

// ---- command dispatch

struct Emission {
  std::string text;
  Json json;
};

namespace detail {

inline Json header(const std::string& command, const RunConfig& cfg) {
  return Json{{"command", command}, {"n", cfg.n}, {"trunc_N", cfg.trunc_N}, {"lambda", cfg.lambda}};
}

inline std::string series_block(const std::string& label, const WeylSeries& f) { return label + ": " + f.str() + "\n"; }

inline std::string riccati_float(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline Json float_matrix(const DMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return Json{{"type", "float"}, {"values", rows}};
}

}  // namespace detail

// Runs one subcommand. Exit status: 0 success, 1 domain error or failed audit, 2 parse/usage error.
inline int run_command(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact computations in Weyl algebras, star products and their deformation theory", "star-forge"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Config file of key = value lines; flags override it");

  RunConfig cfg;
  app.add_option("-n", cfg.n, "Half dimension n (fiber variables Z1..Z2n)")->capture_default_str();
  app.add_option("-N,--trunc", cfg.trunc_N, "Truncation degree N (2 * nu power + fiber degree)")->capture_default_str();
  app.add_option("--lambda", cfg.lambda, "def41, appendix62, or an explicit matrix like [[0,1],[-1,0]]")->capture_default_str();
  app.add_option("--grid", cfg.grid, "Grid points per axis for seminorms")->capture_default_str();
  app.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  app.add_option("--seed", cfg.seed, "Seed for randomized batteries")->capture_default_str();
  app.add_option("--out", cfg.out, "Write output to FILE instead of stdout");

  std::string a_src, b_src;
  auto* star = app.add_subcommand("star", "Moyal product of two series");
  star->add_option("a", a_src, "Left factor")->required();
  star->add_option("b", b_src, "Right factor")->required();
  auto* comm = app.add_subcommand("commutator", "Star commutator [a, b]");
  comm->add_option("a", a_src, "Left argument")->required();
  comm->add_option("b", b_src, "Right argument")->required();
  auto* sharp = app.add_subcommand("sharp", "Weyl continuation f(z + Z) of a base polynomial");
  sharp->add_option("f", a_src, "Base polynomial in z")->required();

  std::string g1 = "0", f1 = "0", g2 = "0", f2 = "0";
  auto* bch = app.add_subcommand("bch", "Compose two group exponents H = g + nu^2 f#");
  bch->add_option("--g1", g1, "Central part of H1 (even in nu)")->capture_default_str();
  bch->add_option("--f1", f1, "Base part of H1")->capture_default_str();
  bch->add_option("--g2", g2, "Central part of H2")->capture_default_str();
  bch->add_option("--f2", f2, "Base part of H2")->capture_default_str();

  std::vector<std::string> images;
  std::string matrix_src, F_src = "0";
  auto* fact = app.add_subcommand("factorize", "Factor an automorphism as A^ o exp(ad(F/nu))");
  fact->add_option("--image", images, "Image of Z_i, repeated 2n times");
  fact->add_option("--A", matrix_src, "Linear part, used with --F to build the images");
  fact->add_option("--F", F_src, "Exponent F (fiber degree >= 3)")->capture_default_str();

  std::string curvature = "0";
  auto* fed = app.add_subcommand("fedosov", "Fedosov recursion on the flat chart");
  fed->add_option("--curvature", curvature, "Central curvature 2-form, e.g. nu^2 * dz1 * dz2")->capture_default_str();

  std::string form_src = "identity";
  int K = 4;
  bool compare = false;
  double riccati_t = 0;
  int steps = 1000;
  auto* sexp = app.add_subcommand("starexp", "Star exponential of a quadratic form A[Z]");
  sexp->add_option("--A", form_src, "Symmetric matrix or 'identity'")->capture_default_str();
  sexp->add_option("-K", K, "Order in t")->capture_default_str();
  sexp->add_flag("--compare", compare, "Print the difference between the Taylor and closed routes");
  sexp->add_option("--riccati", riccati_t, "Integrate the phase flow to time T and compare with the closed form");
  sexp->add_option("--steps", steps, "Integrator steps for --riccati")->capture_default_str();

  std::vector<std::string> phi_src;
  bool mcw = false;
  auto* lift = app.add_subcommand("lift", "CCR defects, closedness and repair for a polynomial symplectomorphism");
  lift->add_option("--phi", phi_src, "Component phi^i in z, repeated 2n times")->required();
  lift->add_flag("--mcw", mcw, "Also solve the lift equation (affine unipotent maps)");

  std::string input;
  int test_degree = kDefaultTestDegree;
  auto* dgla = app.add_subcommand("dgla", "Maurer-Cartan checks for star-product cochains");
  dgla->require_subcommand(1);
  auto* mc = dgla->add_subcommand("mc-check", "MC defect per nu order of B read from JSON");
  mc->add_option("--input", input, "JSON file (stdin when absent)");
  mc->add_option("--test-degree", test_degree, "Monomial degree of the evaluation battery")->capture_default_str();
  auto* tail = dgla->add_subcommand("moyal-tail", "Emit the Moyal cochains B_1..B_N as JSON");

  std::string kind;
  AuditOptions aopt;
  auto* audit = app.add_subcommand("audit", "Run an invariant battery and print PASS or FAIL");
  audit->add_option("kind", kind, "Audit kind")->required()->check(CLI::IsMember(audit_kinds()));
  audit->add_option("--count", aopt.count, "Random cases")->capture_default_str();
  audit->add_option("-K", aopt.K, "Order in t for starexp")->capture_default_str();

  std::vector<std::string> rev(argv.rbegin(), argv.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  Emission em;
  int status = 0;
  try {
    if (cfg.trunc_N < 0) throw DomainError("trunc_N must be non-negative");
    const auto frame = make_frame(cfg);
    const int N = cfg.trunc_N;
    const int n = cfg.n;
    auto eval = [&](const std::string& s, int T) { return evaluate(s, frame, T); };

    if (star->parsed() || comm->parsed()) {
      auto a = eval(a_src, N), b = eval(b_src, N);
      auto v = star->parsed() ? moyal_product(a, b, frame) : star_commutator(a, b, frame);
      em.text = v.str() + "\n";
      em.json = detail::header(star->parsed() ? "star" : "commutator", cfg);
      em.json["result"] = to_json(v);
    } else if (sharp->parsed()) {
      auto v = weyl_continuation(eval(a_src, N), frame);
      em.text = v.str() + "\n";
      em.json = detail::header("sharp", cfg);
      em.json["result"] = to_json(v);
    } else if (bch->parsed()) {
      auto H1 = GroupExponent::make(eval(g1, N + 1), eval(f1, N + 1), frame, N);
      auto H2 = GroupExponent::make(eval(g2, N + 1), eval(f2, N + 1), frame, N);
      auto H = bch_compose(H1, H2);
      bool ok = true;
      for (int i = 0; i < frame.vars(); ++i) {
        auto z = WeylSeries::fiber(n, N, i);
        ok = ok && ad_exp_apply(H, z) == ad_exp_apply(H1, ad_exp_apply(H2, z));
      }
      em.text = detail::series_block("g", H.g_part) + detail::series_block("f", H.f_part) +
                "action on generators: " + (ok ? "PASS" : "FAIL") + "\n";
      em.json = detail::header("bch", cfg);
      em.json["g"] = to_json(H.g_part);
      em.json["f"] = to_json(H.f_part);
      em.json["action_check"] = ok;
      if (!ok) status = 1;
    } else if (fact->parsed()) {
      std::vector<WeylSeries> ims;
      if (!images.empty()) {
        for (const auto& s : images) ims.push_back(eval(s, N));
      } else {
        if (matrix_src.empty()) throw CLI::ValidationError("factorize", "give --image 2n times, or --A with --F");
        RatMatrix A = matrix_src == "identity" ? RatMatrix::identity(frame.vars()) : parse_matrix(matrix_src);
        ims = realize_automorphism(A, eval(F_src, N + 1), frame, N);
      }
      auto data = factorize_automorphism(ims, frame);
      em.text = "A: " + data.A.str() + "\n" + detail::series_block("c", data.c_part) + detail::series_block("F", data.F_part);
      em.json = detail::header("factorize", cfg);
      em.json["A"] = to_json(data.A);
      em.json["c"] = to_json(data.c_part);
      em.json["F"] = to_json(data.F_part);
    } else if (fed->parsed()) {
      FedosovState s(frame, SymplecticConnection::zero(frame.vars()), eval(curvature, N), N);
      auto r = fedosov_recursion(s);
      auto d = flatness_defect(s);
      em.text = detail::series_block("r", r) + "flatness: " + (d.is_zero() ? "PASS" : "FAIL") + "\n";
      em.json = detail::header("fedosov", cfg);
      em.json["r"] = to_json(r);
      em.json["flat"] = d.is_zero();
      if (!d.is_zero()) status = 1;
    } else if (sexp->parsed()) {
      RatMatrix m = form_src == "identity" ? RatMatrix::identity(frame.vars()) : parse_matrix(form_src);
      QuadraticForm A(m);
      em.json = detail::header("starexp", cfg);
      em.json["K"] = K;
      if (riccati_t != 0) {
        QuadraticForm B(RatMatrix(frame.vars(), frame.vars()));
        auto path = riccati_solve(A, B, riccati_t, steps, frame);
        const auto& end = path.samples.back();
        auto closed = riccati_closed(to_eigen(frame.lambda() * A.A), to_eigen(frame.lambda() * B.A), riccati_t);
        const double dq = (end.q - closed.q).cwiseAbs().maxCoeff();
        const double dg = std::abs(end.g - closed.g);
        em.text = "t: " + detail::riccati_float(riccati_t) + "\ng(t): " + detail::riccati_float(end.g) +
                  "\nmax |q - q_closed|: " + detail::riccati_float(dq) + "\n|g - g_closed|: " + detail::riccati_float(dg) + "\n";
        em.json["riccati"] = Json{{"t", riccati_t},
                                  {"steps", steps},
                                  {"q", detail::float_matrix(end.q)},
                                  {"g", Json{{"type", "float"}, {"values", Json::array({end.g})}}},
                                  {"q_closed", detail::float_matrix(closed.q)},
                                  {"g_closed", Json{{"type", "float"}, {"values", Json::array({closed.g})}}}};
      } else {
        auto taylor = star_exp_taylor(A, K, frame);
        Json coeffs = Json::array();
        for (int k = 0; k <= K; ++k) {
          const auto& c = taylor.coeffs[static_cast<std::size_t>(k)];
          em.text += detail::series_block("t^" + std::to_string(k), c);
          coeffs.push_back(to_json(c));
        }
        em.json["taylor"] = coeffs;
        if (compare) {
          auto closed = star_exp_closed(A, K, frame);
          Json diff = Json::array();
          bool zero = true;
          em.text += "difference taylor - closed:\n";
          for (int k = 0; k <= K; ++k) {
            auto d = taylor.coeffs[static_cast<std::size_t>(k)] - closed.coeffs[static_cast<std::size_t>(k)];
            zero = zero && d.is_zero();
            em.text += detail::series_block("t^" + std::to_string(k), d);
            diff.push_back(to_json(d));
          }
          em.text += std::string("routes agree: ") + (zero ? "PASS" : "FAIL") + "\n";
          em.json["difference"] = diff;
          em.json["routes_agree"] = zero;
          if (!zero) status = 1;
        }
      }
    } else if (lift->parsed()) {
      if (static_cast<int>(phi_src.size()) != frame.vars()) throw DimensionMismatch("--phi must be given 2n times");
      if (N < 3) throw DomainError("lift needs N >= 3");
      std::vector<BasePolynomial> comps;
      for (const auto& s : phi_src) comps.push_back(eval(s, 2 * N));
      auto phi = PolySymplectomorphism::make(comps, frame);
      auto tab = ccr_defect(phi, N, frame);
      em.json = detail::header("lift", cfg);
      Json defects = Json::array();
      for (const auto& [o, t] : tab.orders) {
        auto rep = closedness_audit(tab, phi.components, frame, o);
        em.text += "nu^" + std::to_string(o) + ": " + (tab.zero_at(o) ? "zero" : "nonzero") +
                   (rep.closed && rep.jacobi ? ", closed" : ", NOT closed") + "\n";
        Json rows = Json::array();
        for (int s = 0; s < frame.vars(); ++s)
          for (int u = s + 1; u < frame.vars(); ++u) {
            const auto& a = t[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)];
            if (!a.is_zero()) em.text += "  a^{" + std::to_string(s + 1) + std::to_string(u + 1) + "} = " + a.str() + "\n";
            rows.push_back(Json{{"s", s + 1}, {"t", u + 1}, {"value", to_json(a)}});
          }
        defects.push_back(Json{{"order", o}, {"zero", tab.zero_at(o)}, {"closed", rep.closed && rep.jacobi}, {"table", rows}});
      }
      em.json["defects"] = defects;
      auto fix = ccr_repair(phi, N, frame);
      Json corr = Json::array();
      for (const auto& [p, g] : fix.by_order)
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (!g[i].is_zero())
            em.text += "correction nu^" + std::to_string(p) + " g^" + std::to_string(i + 1) + " = " + g[i].str() + "\n";
          corr.push_back(Json{{"nu", p}, {"component", i + 1}, {"value", to_json(g[i])}});
        }
      const bool repaired = ccr_defect(fix.apply(phi.components), N, frame).is_zero();
      em.text += std::string("repaired through nu^") + std::to_string(N) + ": " + (repaired ? "PASS" : "FAIL") + "\n";
      em.json["corrections"] = corr;
      em.json["repaired"] = repaired;
      if (!repaired) status = 1;
      if (mcw) {
        auto F = mcw_lift_solve(phi, FormSection(n, N), N, frame);
        const bool ok = mcw_residual(F, phi, FormSection(n, N), N, frame).is_zero();
        em.text += detail::series_block("F", F) + "lift residual: " + (ok ? "PASS" : "FAIL") + "\n";
        em.json["F"] = to_json(F);
        em.json["residual_zero"] = ok;
        if (!ok) status = 1;
      }
    } else if (mc->parsed()) {
      Json j;
      try {
        if (input.empty()) {
          j = Json::parse(std::cin);
        } else {
          std::ifstream f(input);
          if (!f) throw DomainError("cannot open " + input);
          j = Json::parse(f);
        }
      } catch (const Json::parse_error& e) {
        throw ParseError(std::string("bad JSON: ") + e.what(), 1, static_cast<int>(e.byte));
      }
      const int dim = j.at("dim").get<int>();
      const int order = j.at("order_N").get<int>();
      std::map<int, PolyDiffOp> B;
      for (const auto& [key, val] : j.at("B").items()) B[std::stoi(key)] = op_from_json(val, dim, 1);
      auto d = mc_defect_star(B, order, test_degree);
      em.json = Json{{"command", "dgla mc-check"}, {"dim", dim}, {"order_N", order}, {"test_degree", test_degree}};
      Json per = Json::array();
      for (const auto& [o, op] : d.by_order) {
        em.text += "nu^" + std::to_string(o) + ": " + op.str() + "\n";
        per.push_back(Json{{"order", o}, {"zero", op.is_zero()}, {"defect", to_json(op)}});
      }
      em.text += std::string("MC: ") + (d.zero ? "PASS" : "FAIL") + "\n";
      em.json["defects"] = per;
      em.json["zero"] = d.zero;
      if (!d.zero) status = 1;
    } else if (tail->parsed()) {
      em.json = cochains_json(moyal_tail_cochains(frame, N), frame.vars(), N);
      em.text = em.json.dump(2) + "\n";
    } else if (audit->parsed()) {
      auto res = run_audit(kind, cfg, aopt);
      for (const auto& row : res.rows) em.text += row + "\n";
      em.text += res.pass ? "PASS\n" : "FAIL\n";
      em.json = detail::header("audit", cfg);
      em.json["kind"] = kind;
      em.json["seed"] = cfg.seed;
      em.json["pass"] = res.pass;
      em.json["rows"] = res.detail;
      if (!res.pass) status = 1;
    }
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::Error& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "parse error: " << e.what() << "\n";
    return 2;
  }

  const std::string payload = cfg.format == "json" ? em.json.dump(2) + "\n" : em.text;
  if (cfg.out.empty()) {
    out << payload;
  } else {
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) {
      err << "error: cannot write " << cfg.out << "\n";
      return 1;
    }
    f << payload;
  }
  return status;
}

}  // namespace starforge::cli
