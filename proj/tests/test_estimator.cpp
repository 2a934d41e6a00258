#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

#include "awrb/problems.hpp"

using namespace awrb;

namespace {

Eigen::VectorXd ev(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

std::vector<std::vector<double>> random_basis(std::size_t n, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> Z(N, std::vector<double>(n));
  for (auto& z : Z)
    for (double& x : z) x = g(rng);
  return Z;
}

}  // namespace

TEST_CASE("Riesz constants agree with the dense Gramian spectrum") {
  const auto spec = thermal_block({3, 3});
  ProblemInstance P(spec);
  const Eigen::MatrixXd G = dense_operator(P.gramian().grid(), P.gramian().theta_b({}));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const auto rc = riesz_constants(P.gramian());
  CHECK(rc.c == doctest::Approx(std::sqrt(es.eigenvalues().minCoeff())).epsilon(1e-4));
  CHECK(rc.C == doctest::Approx(std::sqrt(es.eigenvalues().maxCoeff())).epsilon(1e-4));
}

TEST_CASE("Gramian residual matches the fine residual for arbitrary states") {
  const auto spec = thermal_block({3, 3});
  ProblemInstance P(spec);
  const Discretization& D = P.fine();
  const auto Z = random_basis(D.trial().size(), 3, 11);
  const auto G = build_gramians(D, Z, 0.0, P.riesz());
  CHECK(G.Cbb.rows() == static_cast<Eigen::Index>(3 * G.Qb));
  CHECK(G.Cff.rows() == static_cast<Eigen::Index>(G.Qf));
  for (ParameterPoint mu : {ParameterPoint{0.01, 1}, ParameterPoint{2.0, 7}}) {
    const std::vector<double> u{0.3, -1.2, 0.7};
    Eigen::VectorXd r = ev(D.rhs(mu));
    for (std::size_t i = 0; i < 3; ++i) r -= u[i] * ev(D.grid().apply(D.theta_b(mu), Z[i]));
    const double off = residual_l2(D.theta_f(mu), D.theta_b(mu), u, G);
    CHECK(off == doctest::Approx(r.norm()).epsilon(1e-9));
    CHECK(surrogate_dual_norm(D.theta_f(mu), D.theta_b(mu), u, G) == doctest::Approx(off / G.riesz.C));
    CHECK(error_bound(mu, D.theta_f(mu), D.theta_b(mu), u, G, spec.bounds) ==
          doctest::Approx(off / G.riesz.C / spec.bounds.beta_lb(mu)));
  }
}

TEST_CASE("incremental Gramians equal a batch build and have consistent prefixes") {
  const auto spec = thermal_block({3, 3});
  ProblemInstance P(spec);
  const auto Z = random_basis(P.fine().trial().size(), 3, 12);
  GramianBuilder gb(P.fine(), 1e-8, P.riesz());
  for (auto& z : Z) gb.append(z);
  const auto batch = build_gramians(P.fine(), Z, 1e-8, P.riesz());
  CHECK((gb.gramians().Cbb - batch.Cbb).norm() <= 1e-10 * batch.Cbb.norm());
  CHECK((gb.gramians().Cfb - batch.Cfb).norm() <= 1e-10 * batch.Cfb.norm());
  const auto two = build_gramians(P.fine(), {Z[0], Z[1]}, 1e-8, P.riesz());
  const auto pre = gb.prefix(2);
  CHECK(pre.N == 2);
  CHECK((pre.Cbb - two.Cbb).norm() <= 1e-10 * two.Cbb.norm());
}

TEST_CASE("surrogate constants") {
  const RieszConstants r{2.0, 20.0};
  auto d = delta_constants(r, 1e-8, 1e-2);
  CHECK(d.trunc_factor == doctest::Approx(1e-6));
  CHECK(d.c_delta == doctest::Approx(0.1 * (1 - 1e-6)));
  CHECK(d.C_delta == doctest::Approx(1 + 1e-6));
  d = delta_constants(r, 1e-8, 1e-9);  // truncation dominates: capped at 1/2
  CHECK(d.trunc_factor == doctest::Approx(0.5));
  CHECK(d.c_delta == doctest::Approx(0.05));
}

TEST_CASE("stability bounds") {
  StabilityBounds b;
  b.kind = StabilityBounds::Kind::ThermalBlock;
  CHECK(b.beta_lb({0.01, 3}) == doctest::Approx(0.01));
  CHECK(b.gamma_ub({0.01, 3}) == doctest::Approx(1.0));
  CHECK(b.alpha_lb({5.0, 3}) == doctest::Approx(1.0));
  CHECK(b.gamma_ub({5.0, 3}) == doctest::Approx(5.0));
  b.kind = StabilityBounds::Kind::CdrProxy;
  b.beta0 = 0.5;
  CHECK_FALSE(b.coercive());
  CHECK(b.beta_lb({0.0, 0.0}) == doctest::Approx(0.5));
  CHECK(b.beta_lb({30.0, -9.0}) < b.beta_lb({0.0, 0.0}));
  nlohmann::json j = b;
  const auto b2 = j.get<StabilityBounds>();
  CHECK(b2.kind == b.kind);
  CHECK(b2.beta0 == b.beta0);
}

TEST_CASE("tail check flags slowly decaying coefficients") {
  const auto spec = thermal_block({4, 4});
  ProblemInstance P(spec);
  const Universe& U = P.fine().test();
  std::vector<double> fast(U.size()), slow(U.size());
  for (std::size_t p = 0; p < U.size(); ++p) {
    const int l = std::max(U.index(p)[0].j, U.index(p)[1].j);
    fast[p] = std::pow(2.0, -8.0 * l);
    slow[p] = std::pow(2.0, -0.5 * l);
  }
  CHECK_FALSE(tail_check(U, fast, 1e-8).flagged);
  CHECK(tail_check(U, slow, 1e-8).flagged);
}

TEST_CASE("epsilon rule names round-trip") {
  for (auto r : {EpsilonRule::NormRule, EpsilonRule::EllipticNormRule, EpsilonRule::EllipticResidualRule,
                 EpsilonRule::OptimalResidualRule, EpsilonRule::NormalEqResidualRule})
    CHECK(rule_from_string(to_string(r)) == r);
  CHECK_THROWS(rule_from_string("nope"));
}
