#include <doctest.h>

#include <cmath>
#include <random>

#include "awrb/model_io.hpp"
#include "awrb/rb.hpp"

using namespace awrb;

namespace {

Eigen::VectorXd ev(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

// Thermal block at levels (3, 3) with three snapshots; shared by the cases.
struct Fixture {
  ProblemSpec spec = thermal_block({3, 3});
  ProblemInstance P{spec};
  ReducedSpace S{P, 1e-8, true, true};
  std::vector<ParameterPoint> mus{{0.01, 2}, {0.5, 5}, {8.0, 7}};

  Fixture() {
    AwgmConfig cfg;
    cfg.L_max = spec.levels;
    cfg.riesz_lower = P.riesz().c;
    for (auto& mu : mus) S.add_snapshot(solve(P.fine(), mu, 1e-5, spec.measure, cfg));
  }
  AwgmConfig cfg() const {
    AwgmConfig c;
    c.L_max = spec.levels;
    c.riesz_lower = P.riesz().c;
    return c;
  }
  Eigen::MatrixXd Z() const {
    Eigen::MatrixXd z(P.fine().trial().size(), static_cast<Eigen::Index>(S.size()));
    for (std::size_t i = 0; i < S.size(); ++i) z.col(static_cast<Eigen::Index>(i)) = ev(S.basis()[i]);
    return z;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("orthonormalized basis and snapshot coordinates") {
  auto& F = fixture();
  const ReducedModel& m = F.S.model();
  CHECK(m.N() == 3);
  CHECK((m.blocks.gram - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);
  // coords reproduce the snapshots: Z coords = snapshots.
  const Eigen::MatrixXd Z = F.Z();
  for (std::size_t i = 0; i < 3; ++i) {
    const Eigen::VectorXd s = ev(F.P.fine().trial().to_dense(m.snapshots[i]));
    CHECK((Z * m.coords.col(static_cast<Eigen::Index>(i)) - s).norm() <= 1e-12 * s.norm());
  }
  // Upper triangular.
  CHECK(std::abs(m.coords(1, 0)) + std::abs(m.coords(2, 0)) + std::abs(m.coords(2, 1)) == 0.0);
}

TEST_CASE("Galerkin reduced solve equals the dense projected solve") {
  auto& F = fixture();
  const ReducedModel& m = F.S.model();
  const Eigen::MatrixXd Z = F.Z();
  const Discretization& D = F.P.rb_operator();
  for (ParameterPoint mu : {ParameterPoint{0.03, 4}, ParameterPoint{3.0, 9}}) {
    const Eigen::MatrixXd A = dense_operator(D.grid(), D.theta_b(mu));
    const Eigen::VectorXd u = (Z.transpose() * A * Z).lu().solve(Z.transpose() * ev(D.rhs(mu)));
    const Eigen::VectorXd uN = ev(reduced_solve(m, mu).u);
    CHECK((uN - u).norm() <= 1e-10 * u.norm());
  }
}

TEST_CASE("a model prefix equals the model built from fewer snapshots") {
  auto& F = fixture();
  ReducedSpace S2(F.P, 1e-8, true, false);
  AwgmConfig cfg = F.cfg();
  for (std::size_t i = 0; i < 2; ++i) S2.add_snapshot(solve(F.P.fine(), F.mus[i], 1e-5, F.spec.measure, cfg));
  const ReducedModel pre = F.S.model().prefix(2);
  CHECK(pre.N() == 2);
  const ParameterPoint mu{1.0, 3};
  const auto a = reduced_solve(pre, mu).u, b = reduced_solve(S2.model(), mu).u;
  CHECK((ev(a) - ev(b)).norm() <= 1e-10 * ev(b).norm());
  CHECK(estimate(pre, mu, a) == doctest::Approx(estimate(S2.model(), mu, b)).epsilon(1e-8));
}

TEST_CASE("a repeated snapshot is rejected as dependent") {
  auto& F = fixture();
  ReducedSpace S2(F.P, 1e-8, true, false);
  const auto snap = solve(F.P.fine(), F.mus[0], 1e-5, F.spec.measure, F.cfg());
  S2.add_snapshot(snap);
  CHECK_THROWS_AS(S2.add_snapshot(snap), DependentSnapshot);
  CHECK(S2.size() == 1);
}

TEST_CASE("the normal-equation estimate decreases as snapshots are added") {
  auto& F = fixture();
  const ReducedModel& m = F.S.model();
  const ParameterPoint mu = F.mus[0];
  double prev = INFINITY;
  for (std::size_t n = 0; n <= m.N(); ++n) {
    const ReducedModel pm = m.prefix(n);
    // Residual minimization over nested spaces.
    const double e = estimate(pm, mu, reduced_solve(pm, mu, RbSolver::NormalEq).u);
    CHECK(e <= prev * (1 + 1e-9));
    prev = e;
  }
}

TEST_CASE("discrete inf-sup constant matches the dense singular value") {
  auto& F = fixture();
  const ReducedModel& m = F.S.model();
  const Eigen::MatrixXd Z = F.Z();
  const Discretization& D = F.P.rb_operator();
  const ParameterPoint mu{0.2, 6};
  const Eigen::MatrixXd A = Z.transpose() * dense_operator(D.grid(), D.theta_b(mu)) * Z;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  CHECK(discrete_infsup(m, mu, RbSolver::Galerkin) == doctest::Approx(svd.singularValues().minCoeff()).epsilon(1e-8));
}

TEST_CASE("snapshot residual ratio is near one at selection") {
  auto& F = fixture();
  const double r = snapshot_residual_ratio(F.S, F.S.size() - 1);
  CHECK(r > 0.9);
  CHECK(r < 2.0);
}

TEST_CASE("model files round-trip") {
  auto& F = fixture();
  const ReducedModel& m = F.S.model();
  const std::string bytes = serialize_model(m);
  CHECK(bytes.compare(0, 8, "AWRBMODL") == 0);
  const ReducedModel back = deserialize_model(bytes);
  CHECK(back.N() == m.N());
  CHECK(back.samples == m.samples);
  CHECK(back.snapshots.size() == m.snapshots.size());
  CHECK(back.snapshots[1].entries() == m.snapshots[1].entries());
  for (ParameterPoint mu : {ParameterPoint{0.07, 1}, ParameterPoint{4.0, 8}}) {
    const auto a = reduced_solve(m, mu).u, b = reduced_solve(back, mu).u;
    CHECK(a == b);
    CHECK(estimate(m, mu, a) == estimate(back, mu, b));
  }
  CHECK(serialize_model(back) == bytes);
}

TEST_CASE("corrupt model files are rejected") {
  auto& F = fixture();
  std::string bytes = serialize_model(F.S.model());
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(bad), ModelFormatError);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() / 2)), ModelFormatError);
  bad = bytes;
  bad[8] = 9;  // version
  CHECK_THROWS_AS(deserialize_model(bad), ModelFormatError);
  CHECK_THROWS_AS(deserialize_model(""), ModelFormatError);
}

TEST_CASE("an empty model gives the data-only estimate") {
  auto& F = fixture();
  const ReducedModel m0 = F.S.model().prefix(0);
  const ParameterPoint mu{1.0, 5};
  const double e = estimate(m0, mu, {});
  const double f = norm2(F.P.fine().rhs(mu)) / F.P.riesz().C / F.spec.bounds.beta_lb(mu);
  CHECK(e == doctest::Approx(f).epsilon(1e-8));
}
