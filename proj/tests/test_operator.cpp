#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>

#include "awrb/grid.hpp"
#include "awrb/operator.hpp"
#include "awrb/quadrature.hpp"

using namespace awrb;

namespace {

UnivariateBasis bs(Boundary b, Family f = Family::BiorthoBSpline) {
  UnivariateBasisSpec s;
  s.family = f;
  s.boundary = b;
  return UnivariateBasis(s);
}

WaveletIndex1D w(int j, int k) { return {j, k, j == 0 ? Kind::Scaling : Kind::Wavelet}; }

// Composite Gauss quadrature on dyadic panels of width 2^-10, each panel
// further split at the factor's interval ends.  Exact for levels <= 7.
double oracle_factor(const Factor1D& f, const UnivariateBasis& A, const WaveletIndex1D& a, const UnivariateBasis& B,
                     const WaveletIndex1D& b) {
  const auto& q = gauss_legendre(3);
  const int P = 1 << 10;
  double s = 0.0;
  for (int p = 0; p < P; ++p) {
    const double lo = std::max(f.a, static_cast<double>(p) / P), hi = std::min(f.b, static_cast<double>(p + 1) / P);
    if (hi <= lo) continue;
    for (std::size_t g = 0; g < q.x.size(); ++g) {
      const double x = lo + (hi - lo) * q.x[g];
      const double u = f.dtrial ? A.eval_deriv(a, x) : A.eval(a, x);
      const double v = f.dtest ? B.eval_deriv(b, x) : B.eval(b, x);
      s += (hi - lo) * q.w[g] * (f.w0 + f.w1 * x) * u * v;
    }
  }
  return s;
}

std::vector<WaveletIndex1D> full_1d(const UnivariateBasis& B, int J) {
  std::vector<WaveletIndex1D> v;
  for (int j = 0; j <= J; ++j)
    for (int k = 0; k < B.count(j); ++k) v.push_back(w(j, k));
  return v;
}

IndexSet full_box(const TensorBasis& tb, int J0, int J1) {
  std::vector<TensorIndex> v;
  for (auto& a : full_1d(tb.b[0], J0))
    for (auto& b : full_1d(tb.b[1], J1)) v.emplace_back(a, b);
  return IndexSet(v);
}

IndexSet random_multitree(const TensorBasis& tb, std::mt19937& rng, int count, int maxlev) {
  std::vector<TensorIndex> v;
  std::uniform_int_distribution<int> lev(0, maxlev);
  for (int i = 0; i < count; ++i) {
    int j0 = lev(rng), j1 = lev(rng);
    v.emplace_back(w(j0, std::uniform_int_distribution<int>(0, tb.b[0].count(j0) - 1)(rng)),
                   w(j1, std::uniform_int_distribution<int>(0, tb.b[1].count(j1) - 1)(rng)));
  }
  return multitree_completion(IndexSet(v), tb);
}

// A diffusion-advection-reaction style component touching all derivative pairs.
OperatorComponent mixed_component() {
  OperatorComponent c;
  c.name = "mixed";
  Term t1;
  t1.f[0] = {1, 1, 1.0, 0.0, 0.0, 1.0};
  t1.f[1] = {0, 0, 1.0, 0.0, 0.0, 1.0};
  Term t2;
  t2.coeff = -0.7;
  t2.f[0] = {1, 0, 0.5, -1.0, 0.0, 1.0};
  t2.f[1] = {0, 1, 1.0, 0.0, 0.25, 0.75};
  Term t3;
  t3.coeff = 2.0;
  t3.f[0] = {0, 0, 1.0, 0.0, 1.0 / 3.0, 1.0};
  t3.f[1] = {0, 0, 0.0, 1.0, 0.0, 0.4};
  c.terms = {t1, t2, t3};
  return c;
}

Space space(TensorBasis b, Scaling::Type s = Scaling::Type::None) {
  Space sp{std::move(b), {}};
  sp.scaling.type = s;
  return sp;
}

}  // namespace

TEST_CASE("theta expressions") {
  ParameterPoint mu{0.5, 3.0};
  CHECK(ThetaExpr("1")(mu) == 1.0);
  CHECK(ThetaExpr("mu1")(mu) == 0.5);
  CHECK(ThetaExpr("2*mu1 - mu2*(1+mu1)")(mu) == doctest::Approx(1.0 - 4.5));
  CHECK(ThetaExpr("-mu2")(mu) == -3.0);
  CHECK(ThetaExpr("delta(mu2, 3)")(mu) == 1.0);
  CHECK(ThetaExpr("delta(mu2,4)")(mu) == 0.0);
  CHECK(ThetaExpr("1 - 2 - 3")(mu) == -4.0);
  CHECK(ThetaExpr("mu2*delta(mu1,0.5)").max_parameter() == 2);
  CHECK_THROWS_AS(ThetaExpr("mu0"), std::invalid_argument);
  CHECK_THROWS_AS(ThetaExpr("1 +"), std::invalid_argument);
  CHECK_THROWS_AS(ThetaExpr("(mu1"), std::invalid_argument);
  CHECK_THROWS_AS(ThetaExpr("mu3")(mu), std::out_of_range);
}

TEST_CASE("theta evaluation at problem parameters") {
  // Two-subdomain diffusion with nine localized sources.
  std::vector<ThetaExpr> thermal{ThetaExpr("1"), ThetaExpr("mu1")};
  ParameterBox tb{{0.01, 1.0}, {1.0, 9.0}, {false, true}};
  auto th = evaluate_thetas(thermal, {0.5, 3.0}, tb);
  CHECK(th == std::vector<double>{1.0, 0.5});
  std::vector<ThetaExpr> loads;
  for (int i = 1; i <= 9; ++i) loads.emplace_back("delta(mu2," + std::to_string(i) + ")");
  auto e = evaluate_thetas(loads, {0.5, 3.0}, tb);
  for (int i = 0; i < 9; ++i) CHECK(e[i] == (i == 2 ? 1.0 : 0.0));
  CHECK_THROWS_AS(evaluate_thetas(loads, {0.5, 3.5}, tb), std::domain_error);
  CHECK_THROWS_AS(evaluate_thetas(loads, {2.0, 3.0}, tb), std::domain_error);
  CHECK_NOTHROW(evaluate_thetas(loads, {2.0, 3.0}, tb, DomainPolicy::Ignore));

  // Space-time convection-diffusion-reaction.
  std::vector<ThetaExpr> cdr{ThetaExpr("1"), ThetaExpr("mu1"), ThetaExpr("mu2")};
  ParameterBox cb{{0.0, -9.0}, {30.0, 15.0}, {}};
  CHECK(evaluate_thetas(cdr, {0.0, -9.0}, cb) == std::vector<double>{1.0, 0.0, -9.0});
}

TEST_CASE("univariate entries against composite quadrature") {
  std::mt19937 rng(11);
  const Factor1D factors[] = {{0, 0, 1, 0, 0, 1}, {1, 1, 1, 0, 0, 1}, {1, 0, 0.5, -1, 0, 1}, {0, 1, 2, 1, 0.5, 1},
                              {1, 1, 1, 0, 1.0 / 3.0, 2.0 / 3.0}};
  for (auto b : {Boundary::DirichletHomog, Boundary::Free, Boundary::Periodic}) {
    auto B = bs(b);
    auto all = full_1d(B, 4);
    for (int rep = 0; rep < 60; ++rep) {
      auto a = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
      auto c = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
      for (auto& f : factors) {
        double got = integrate_factor(f, function_on_unit(B, a), function_on_unit(B, c));
        CHECK(got == doctest::Approx(oracle_factor(f, B, a, B, c)).epsilon(1e-10).scale(1.0));
      }
    }
  }
  auto M = bs(Boundary::Free, Family::OrthonormalMultiwavelet);
  auto all = full_1d(M, 3);
  for (std::size_t i = 0; i < all.size(); i += 3)
    for (std::size_t k = 0; k < all.size(); k += 5)
      CHECK(integrate_factor(factors[3], function_on_unit(M, all[i]), function_on_unit(M, all[k])) ==
            doctest::Approx(oracle_factor(factors[3], M, all[i], M, all[k])).epsilon(1e-10).scale(1.0));
}

TEST_CASE("symmetric components give symmetric matrices; disjoint supports give zero") {
  TensorBasis tb(bs(Boundary::DirichletHomog), bs(Boundary::Free));
  auto sp = space(tb, Scaling::Type::H1Sum);
  OperatorComponent lap{"lap", {}};
  Term tx, ty;
  tx.f[0] = {1, 1, 1, 0, 0.5, 1};
  ty.f[1] = {1, 1, 1, 0, 0.5, 1};
  tx.f[1] = ty.f[0] = {0, 0, 1, 0, 0, 1};
  ty.f[0].a = 0.5;
  lap.terms = {tx, ty};
  auto box = full_box(tb, 2, 2);
  for (auto& r : box)
    for (auto& c : box) {
      CHECK(entry(lap, sp, sp, r, c) == doctest::Approx(entry(lap, sp, sp, c, r)).epsilon(1e-13).scale(1.0));
      bool apart = false;
      for (int d = 0; d < 2; ++d)
        if (!tb.b[d].support(r[d]).intersects_interior(tb.b[d].support(c[d]))) apart = true;
      if (apart) CHECK(entry(lap, sp, sp, r, c) == 0.0);
    }
  // The diffusion form restricted to x >= 1/2 vanishes on functions living in x < 1/2.
  TensorIndex left(w(3, 1), w(1, 2));
  CHECK(tb.b[0].support(left[0]).parts.back().hi <= 0.5);
  CHECK(entry(lap, sp, sp, left, left) == 0.0);
}

TEST_CASE("restricted application equals dense assembly") {
  std::mt19937 rng(42);
  std::normal_distribution<double> N01;
  auto comp = mixed_component();
  struct Setup {
    TensorBasis trial, test;
    Scaling::Type ts, ss;
  };
  std::vector<Setup> setups{
      {TensorBasis(bs(Boundary::DirichletHomog), bs(Boundary::Free)),
       TensorBasis(bs(Boundary::DirichletHomog), bs(Boundary::Free)), Scaling::Type::H1Sum, Scaling::Type::H1Sum},
      {TensorBasis(bs(Boundary::Periodic), bs(Boundary::DirichletHomog)),
       TensorBasis(bs(Boundary::Periodic, Family::OrthonormalMultiwavelet), bs(Boundary::DirichletHomog)),
       Scaling::Type::SpaceTimeX, Scaling::Type::None},
  };
  for (auto& s : setups) {
    auto trial = space(s.trial, s.ts), test = space(s.test, s.ss);
    for (int rep = 0; rep < 4; ++rep) {
      auto cols = random_multitree(s.trial, rng, 8, 4);
      auto rows = random_multitree(s.test, rng, 8, 4);
      if (cols.size() > 200 || rows.size() > 200) continue;
      std::vector<CoeffVector::Entry> e;
      for (auto& c : cols) e.push_back({c, N01(rng)});
      CoeffVector v(e);
      auto y = apply_restricted(comp, trial, test, rows, cols, v);
      CHECK(y.support().subset_of(rows));
      for (auto& r : rows) {
        double ref = 0.0;
        for (auto& [c, x] : v) ref += entry(comp, trial, test, r, c) * x;
        CHECK(y.get(r) == doctest::Approx(ref).epsilon(1e-11).scale(1.0));
      }
    }
  }
}

TEST_CASE("restricted application in one dimension and argument checks") {
  TensorBasis tb(bs(Boundary::Periodic));
  auto sp = space(tb, Scaling::Type::Product);
  OperatorComponent mass{"mass", {Term{}}};
  std::vector<TensorIndex> all;
  for (auto& i : full_1d(tb.b[0], 4)) all.emplace_back(i);
  IndexSet S(all);
  std::vector<CoeffVector::Entry> e;
  std::mt19937 rng(1);
  std::normal_distribution<double> N01;
  for (auto& t : S) e.push_back({t, N01(rng)});
  CoeffVector v(e);
  auto y = apply_restricted(mass, sp, sp, S, S, v);
  for (auto& r : S) {
    double ref = 0.0;
    for (auto& [c, x] : v) ref += entry(mass, sp, sp, r, c) * x;
    CHECK(y.get(r) == doctest::Approx(ref).epsilon(1e-12).scale(1.0));
  }
  IndexSet not_tree({TensorIndex(w(3, 1))});
  CHECK_THROWS_AS(apply_restricted(mass, sp, sp, not_tree, S, v), std::invalid_argument);
  CHECK_THROWS_AS(apply_restricted(mass, sp, sp, S, not_tree, CoeffVector()), std::invalid_argument);
  IndexSet coarse({TensorIndex(w(0, 0)), TensorIndex(w(0, 1))});
  CHECK_THROWS_AS(apply_restricted(mass, sp, sp, S, coarse, v), std::invalid_argument);
}

TEST_CASE("work of the restricted application grows linearly") {
  // Doubling a multitree should roughly double the work, not square it.
  TensorBasis tb(bs(Boundary::DirichletHomog), bs(Boundary::Free));
  auto sp = space(tb, Scaling::Type::H1Sum);
  auto comp = mixed_component();
  auto measure = [&](int J) {
    auto S = full_box(tb, J, 2);
    std::vector<CoeffVector::Entry> e;
    for (auto& t : S) e.push_back({t, 1.0});
    ApplyCounters c;
    apply_restricted(comp, sp, sp, S, S, CoeffVector(e), &c);
    return std::pair<double, double>(static_cast<double>(c.entries_1d) / S.size(), static_cast<double>(S.size()));
  };
  auto [w5, n5] = measure(5);
  auto [w6, n6] = measure(6);
  auto [w7, n7] = measure(7);
  CHECK(n6 > 1.9 * n5);
  CHECK(n7 > 1.9 * n6);
  // work per index grows at most like the number of levels
  CHECK(w6 < w5 * 1.35);
  CHECK(w7 < w6 * 1.35);
}

TEST_CASE("load vectors") {
  auto B = bs(Boundary::Free);
  TensorBasis tb(bs(Boundary::DirichletHomog), B);
  auto sp = space(tb);
  FunctionalComponent src{"src", {}};
  FunctionalTerm ft;
  ft.f[0] = Func1D::indicator(1.0 / 3.0, 2.0 / 3.0);
  ft.f[1] = Func1D::indicator(0.4, 0.8);
  src.terms = {ft};
  auto rows = full_box(tb, 3, 3);
  auto r = assemble_rhs(src, sp, rows);
  auto q1 = [&](const UnivariateBasis& U, const WaveletIndex1D& i, double a, double b) {
    const auto& q = gauss_legendre(3);
    const int P = 1 << 12;
    double s = 0.0;
    for (int p = 0; p < P; ++p) {
      const double lo = std::max(a, static_cast<double>(p) / P), hi = std::min(b, static_cast<double>(p + 1) / P);
      if (hi <= lo) continue;
      for (std::size_t g = 0; g < q.x.size(); ++g) s += (hi - lo) * q.w[g] * U.eval(i, lo + (hi - lo) * q.x[g]);
    }
    return s;
  };
  for (auto& t : rows) {
    double ref = q1(tb.b[0], t[0], 1.0 / 3.0, 2.0 / 3.0) * q1(tb.b[1], t[1], 0.4, 0.8);
    CHECK(r.get(t) == doctest::Approx(ref).epsilon(1e-10).scale(1.0));
  }

  // cos(2 pi t) against periodic functions: zero on the coarse level where
  // the hats sum to a constant, and matching quadrature everywhere.
  TensorBasis pb(bs(Boundary::Periodic));
  FunctionalComponent cosf{"cos", {}};
  FunctionalTerm ct;
  ct.f[0] = Func1D::cosine(1.0);
  cosf.terms = {ct};
  std::vector<TensorIndex> all;
  for (auto& i : full_1d(pb.b[0], 4)) all.emplace_back(i);
  auto rc = assemble_rhs(cosf, space(pb), IndexSet(all));
  double hat_sum = 0.0;
  for (int k = 0; k < pb.b[0].count(0); ++k) hat_sum += rc.get(TensorIndex(w(0, k))) / pb.b[0].eval(w(0, k), k / 4.0);
  CHECK(std::abs(hat_sum) < 1e-13);
  const auto& q = gauss_legendre(6);
  for (auto& t : all) {
    double s = 0.0;
    const int P = 1 << 8;
    for (int p = 0; p < P; ++p)
      for (std::size_t g = 0; g < q.x.size(); ++g) {
        const double x = (p + q.x[g]) / P;
        s += q.w[g] / P * std::cos(2 * std::numbers::pi * x) * pb.b[0].eval(t[0], x);
      }
    CHECK(rc.get(t) == doctest::Approx(s).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("affine combination of components") {
  // b(mu) = sum_q theta_q(mu) b_q entrywise and through the restricted apply.
  TensorBasis tb(bs(Boundary::DirichletHomog), bs(Boundary::Free));
  auto sp = space(tb, Scaling::Type::H1Sum);
  OperatorComponent c0{"right", {}}, c1{"left", {}};
  for (int side = 0; side < 2; ++side) {
    auto& c = side ? c1 : c0;
    const double a = side ? 0.0 : 0.5, b = side ? 0.5 : 1.0;
    Term tx, ty;
    tx.f[0] = {1, 1, 1, 0, a, b};
    ty.f[0] = {0, 0, 1, 0, a, b};
    ty.f[1] = {1, 1, 1, 0, 0, 1};
    c.terms = {tx, ty};
  }
  OperatorComponent full{"full", {}};
  Term fx, fy;
  fx.f[0] = {1, 1, 1, 0, 0, 1};
  fy.f[1] = {1, 1, 1, 0, 0, 1};
  full.terms = {fx, fy};
  auto th = evaluate_thetas({ThetaExpr("1"), ThetaExpr("mu1")}, {1.0, 1.0}, ParameterBox{{0.01, 1}, {1, 9}, {}});
  auto box = full_box(tb, 2, 2);
  for (auto& r : box)
    for (auto& c : box)
      CHECK(th[0] * entry(c0, sp, sp, r, c) + th[1] * entry(c1, sp, sp, r, c) ==
            doctest::Approx(entry(full, sp, sp, r, c)).epsilon(1e-12).scale(1.0));
}

TEST_CASE("json of operator pieces") {
  Factor1D f{1, 0, 0.5, -1.0, 0.25, 0.75};
  nlohmann::json j = f;
  CHECK(j.get<Factor1D>() == f);
  Func1D g = Func1D::indicator(0.4, 0.8);
  nlohmann::json jg = g;
  auto g2 = jg.get<Func1D>();
  CHECK(g2.type == Func1D::Type::Indicator);
  CHECK(g2.a == 0.4);
  CHECK(g2.b == 0.8);
  Scaling s{Scaling::Type::SpaceTimeX, 0};
  nlohmann::json js = s;
  CHECK(js.get<Scaling>().type == Scaling::Type::SpaceTimeX);
  ParameterBox b{{0, -9}, {30, 15}, {false, false}};
  nlohmann::json jb = b;
  auto b2 = jb.get<ParameterBox>();
  CHECK(b2.lo == b.lo);
  CHECK(b2.hi == b.hi);
  CHECK_THROWS(nlohmann::json({{"type", "bogus"}}).get<Scaling>());
}

// ---------------------------------------------------------------------------
// Grid application on level-capped boxes

namespace {

AffineBilinearOperator small_operator(TensorBasis trial, TensorBasis test, Scaling::Type ts, Scaling::Type ss) {
  AffineBilinearOperator op;
  op.trial = space(std::move(trial), ts);
  op.test = space(std::move(test), ss);
  OperatorComponent second{"second", {}};
  Term t;
  t.coeff = 0.3;
  t.f[0] = {0, 0, 1, 0, 0.5, 1};
  t.f[1] = {1, 1, 1, 0, 0, 1};
  second.terms = {t};
  op.components = {mixed_component(), second};
  op.thetas = {ThetaExpr("1"), ThetaExpr("mu1")};
  return op;
}

}  // namespace

TEST_CASE("grid application equals entrywise assembly on the level box") {
  std::mt19937 rng(8);
  std::normal_distribution<double> N01;
  UnivariateBasisSpec sx;
  sx.boundary = Boundary::DirichletHomog;
  sx.s = 1.0;
  std::vector<AffineBilinearOperator> ops{
      small_operator(TensorBasis(bs(Boundary::DirichletHomog), bs(Boundary::Free)),
                     TensorBasis(bs(Boundary::DirichletHomog), bs(Boundary::Free)), Scaling::Type::H1Sum,
                     Scaling::Type::H1Sum),
      small_operator(TensorBasis(bs(Boundary::Periodic), bs(Boundary::DirichletHomog)),
                     TensorBasis(bs(Boundary::Periodic), UnivariateBasis(sx)), Scaling::Type::SpaceTimeX,
                     Scaling::Type::Product)};
  const std::vector<double> wts{1.0, -2.5};
  for (auto& op : ops) {
    GridOperator G(op, {2, 1});
    const auto& U = G.trial();
    const std::size_t n = U.size();
    std::vector<double> x(n), z(n);
    for (auto& a : x) a = N01(rng);
    for (auto& a : z) a = N01(rng);
    auto y = G.apply(wts, x);
    std::vector<double> dense(n * n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        dense[r * n + c] = wts[0] * entry(op.components[0], op.trial, op.test, U.index(r), U.index(c)) +
                           wts[1] * entry(op.components[1], op.trial, op.test, U.index(r), U.index(c));
    for (std::size_t r = 0; r < n; ++r) {
      double ref = 0.0;
      for (std::size_t c = 0; c < n; ++c) ref += dense[r * n + c] * x[c];
      CHECK(y[r] == doctest::Approx(ref).epsilon(1e-11).scale(1.0));
    }
    // transpose: <z, A x> = <A^T z, x>
    auto at = G.apply_transpose(wts, z);
    double l = 0.0, rr = 0.0;
    for (std::size_t i = 0; i < n; ++i) l += z[i] * y[i], rr += at[i] * x[i];
    CHECK(l == doctest::Approx(rr).epsilon(1e-12));
    auto dg = G.diagonal(wts);
    for (std::size_t i = 0; i < n; ++i) CHECK(dg[i] == doctest::Approx(dense[i * n + i]).epsilon(1e-11).scale(1.0));
    if (op.test.scaling.type == Scaling::Type::Product) {
      auto nd = G.normal_diagonal(wts);
      for (std::size_t c = 0; c < n; ++c) {
        double ref = 0.0;
        for (std::size_t r = 0; r < n; ++r) ref += dense[r * n + c] * dense[r * n + c];
        CHECK(nd[c] == doctest::Approx(ref).epsilon(1e-10).scale(1.0));
      }
    } else {
      CHECK_THROWS_AS(G.normal_diagonal(wts), std::logic_error);
    }
  }
}

TEST_CASE("grid load equals entrywise load") {
  TensorBasis tb(bs(Boundary::DirichletHomog), bs(Boundary::Free));
  FunctionalComponent src{"src", {}};
  FunctionalTerm ft;
  ft.f[0] = Func1D::indicator(1.0 / 3.0, 2.0 / 3.0);
  ft.f[1] = Func1D::indicator(0.4, 0.8);
  FunctionalTerm ct;
  ct.coeff = -0.5;
  ct.f[0] = Func1D::cosine(1.0);
  ct.f[1] = Func1D::constant(2.0);
  src.terms = {ft, ct};
  Universe U(tb, {3, 2});
  Scaling sc{Scaling::Type::H1Sum, 0};
  auto g = grid_load(src, U, sc);
  std::vector<TensorIndex> all;
  for (std::size_t i = 0; i < U.size(); ++i) all.push_back(U.index(i));
  auto ref = assemble_rhs(src, Space{tb, sc}, IndexSet(all));
  for (std::size_t i = 0; i < U.size(); ++i) CHECK(g[i] == doctest::Approx(ref.get(U.index(i))).epsilon(1e-11).scale(1.0));
  // flat positions round-trip
  for (std::size_t i = 0; i < U.size(); i += 7) CHECK(U.flat(U.index(i)) == i);
  CHECK_THROWS_AS(U.flat(TensorIndex(w(4, 0), w(0, 0))), std::out_of_range);
  auto v = U.to_sparse(g, 1e-3);
  auto back = U.to_dense(v);
  for (std::size_t i = 0; i < U.size(); ++i) CHECK(back[i] == (std::abs(g[i]) > 1e-3 ? g[i] : 0.0));
}
