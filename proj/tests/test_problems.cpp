#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "awrb/problems.hpp"

using namespace awrb;

TEST_CASE("grid helpers") {
  const auto g = tensor_grid({{1, 2}, {10, 20, 30}});
  REQUIRE(g.size() == 6);
  CHECK(g[0] == ParameterPoint{1, 10});
  CHECK(g[1] == ParameterPoint{1, 20});
  CHECK(g[3] == ParameterPoint{2, 10});
  const auto l = log_spaced(0.01, 10.0, 20);
  CHECK(l.front() == doctest::Approx(0.01));
  CHECK(l.back() == doctest::Approx(10.0));
  CHECK(l[1] / l[0] == doctest::Approx(l[2] / l[1]));
  const auto u = uniform_spaced(-9, 15, 50);
  CHECK(u.size() == 50);
  CHECK(u[1] - u[0] == doctest::Approx(24.0 / 49));
}

TEST_CASE("thermal block presets and bounds") {
  const auto p = thermal_block({3, 3});
  CHECK(p.preset("train").points.size() == 180);
  CHECK(p.preset("test").points.size() == 450);
  CHECK(p.preset("train").points.front() == ParameterPoint{0.01, 1});
  CHECK(p.preset("test").points.back()[0] == doctest::Approx(20.0));
  CHECK_THROWS(p.preset("missing"));
  CHECK(p.bounds.coercive());
  CHECK(p.op.thetas.size() == p.op.components.size());
  CHECK(p.rhs.thetas.size() == 9);
}

TEST_CASE("thermal block bounds hold for the discrete operator") {
  const auto p = thermal_block({3, 3});
  // B(mu) >= min(1, mu1) B(1) and B(mu) <= max(1, mu1) B(1) in the Loewner
  // order, so the discrete constants scale at least like the bounds.
  const std::vector<ParameterPoint> mus{{1.0, 1}, {0.01, 1}, {0.1, 1}, {10.0, 1}};
  const auto s = dense_infsup(p, {3, 3}, mus);
  for (std::size_t i = 1; i < s.size(); ++i) {
    CHECK(s[i].beta >= p.bounds.beta_lb(s[i].mu) * s[0].beta * (1 - 1e-8));
    CHECK(s[i].gamma <= p.bounds.gamma_ub(s[i].mu) * s[0].gamma * (1 + 1e-8));
  }
  // The operator is an affine combination of the component operators.
  ProblemInstance P(p);
  const Discretization& D = P.fine();
  const ParameterPoint mu{2.0, 4};
  const Eigen::MatrixXd B = dense_operator(D.grid(), D.theta_b(mu));
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(B.rows(), B.cols());
  const auto th = D.theta_b(mu);
  for (std::size_t q = 0; q < th.size(); ++q) {
    std::vector<double> e(th.size(), 0.0);
    e[q] = 1.0;
    sum += th[q] * dense_operator(D.grid(), e);
  }
  CHECK((B - sum).norm() <= 1e-12 * B.norm());
}

TEST_CASE("CDR presets and calibrated stability proxy") {
  const auto p = cdr_spacetime({3, 3}, true);
  CHECK(p.preset("train").points.size() == 400);
  CHECK(p.preset("test").points.size() == 2500);
  CHECK(p.preset("train").points.front() == ParameterPoint{0.0, -9.0});
  CHECK_FALSE(p.bounds.coercive());
  CHECK(p.bounds.beta0 > 0.0);
  CHECK(p.bounds.gamma0 >= p.bounds.beta0);
  // The calibrated proxy is below the discrete constant on the calibration set.
  const std::vector<ParameterPoint> mus{{0.0, -9.0}, {30.0, 15.0}, {10.0, 0.0}};
  for (auto& s : dense_infsup(p, {3, 3}, mus)) {
    CHECK(p.bounds.beta_lb(s.mu) <= s.beta * (1 + 1e-8));
    CHECK(p.bounds.gamma_ub(s.mu) >= s.gamma * (1 - 1e-8));
  }
}

TEST_CASE("problem specs round-trip through JSON") {
  for (const auto& p : {thermal_block({3, 3}), cdr_spacetime({3, 3}, false), poisson_1d(5), toy_1d(4)}) {
    const nlohmann::json j = p;
    const auto q = j.get<ProblemSpec>();
    CHECK(nlohmann::json(q) == j);
    CHECK(q.name == p.name);
    CHECK(q.levels == p.levels);
    CHECK(q.presets.size() == p.presets.size());
    if (q.box.dim() > 0) {
      const ParameterPoint mu = q.presets.front().points.front();
      CHECK(evaluate_thetas(q.op.thetas, mu, q.box) == evaluate_thetas(p.op.thetas, mu, p.box));
      CHECK(evaluate_thetas(q.rhs.thetas, mu, q.box) == evaluate_thetas(p.rhs.thetas, mu, p.box));
    }
  }
}

TEST_CASE("preset lookup by name") {
  CHECK(make_problem("poisson-1d").name == "poisson-1d");
  CHECK(make_problem("toy-1d", std::array<int, 2>{4, 0}).levels[0] == 4);
  CHECK(make_problem("thermal-block", std::array<int, 2>{3, 3}).levels == std::array<int, 2>{3, 3});
  CHECK_THROWS_AS(make_problem("nonsense"), std::invalid_argument);
}

TEST_CASE("solver names round-trip") {
  for (auto s : {RbSolver::Galerkin, RbSolver::PetrovSupremizer, RbSolver::NormalEq})
    CHECK(solver_from_string(to_string(s)) == s);
  CHECK_THROWS(solver_from_string("LU"));
}

TEST_CASE("parameters outside the box follow the domain policy") {
  const auto p = thermal_block({3, 3});
  CHECK_THROWS_AS(evaluate_thetas(p.op.thetas, {0.001, 1}, p.box, DomainPolicy::Error), std::domain_error);
  CHECK_NOTHROW(evaluate_thetas(p.op.thetas, {0.001, 1}, p.box, DomainPolicy::Ignore));
  CHECK_THROWS_AS(evaluate_thetas(p.op.thetas, {1.0, 2.5}, p.box, DomainPolicy::Error), std::domain_error);
}
