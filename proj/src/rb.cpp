#include "awrb/rb.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace awrb {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Lower Cholesky factor of an SPD Gram matrix.
Eigen::MatrixXd chol(const Eigen::MatrixXd& G) {
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw ReducedSolveError("reduced Gram matrix is not positive definite");
  return llt.matrixL();
}

}  // namespace

std::vector<double> ReducedModel::theta_b(const ParameterPoint& mu, DomainPolicy p) const {
  return evaluate_thetas(spec.op.thetas, mu, spec.box, p);
}

std::vector<double> ReducedModel::theta_f(const ParameterPoint& mu, DomainPolicy p) const {
  return evaluate_thetas(spec.rhs.thetas, mu, spec.box, p);
}

ReducedModel ReducedModel::prefix(std::size_t n) const {
  if (n > N()) throw std::out_of_range("reduced model: prefix longer than the basis");
  ReducedModel m = *this;
  const auto k = static_cast<Eigen::Index>(n);
  m.samples.resize(n);
  m.eps.resize(n);
  m.coords = coords.topLeftCorner(k, k);
  for (auto& b : m.blocks.B) b = Eigen::MatrixXd(b.topLeftCorner(k, k));
  for (auto& f : m.blocks.f) f = Eigen::VectorXd(f.head(k));
  m.blocks.gram = blocks.gram.topLeftCorner(k, k);
  const auto Qb = static_cast<Eigen::Index>(gram.Qb);
  if (blocks.has_supremizers()) {
    m.blocks.T = blocks.T.topLeftCorner(k * Qb, k * Qb);
    m.blocks.Feta = blocks.Feta.leftCols(k * Qb);
  }
  m.gram.N = n;
  m.gram.Cfb = gram.Cfb.leftCols(k * Qb);
  m.gram.Cbb = gram.Cbb.topLeftCorner(k * Qb, k * Qb);
  if (m.snapshots.size() > n) m.snapshots.resize(n);
  return m;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> reduced_assemble(const ReducedModel& m, const ParameterPoint& mu,
                                                             RbSolver solver) {
  const auto tb = m.theta_b(mu), tf = m.theta_f(mu);
  const auto N = static_cast<Eigen::Index>(m.N());
  const std::size_t Qb = tb.size(), Qf = tf.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
  switch (solver) {
    case RbSolver::Galerkin:
      for (std::size_t q = 0; q < Qb; ++q) A += tb[q] * m.blocks.B.at(q);
      for (std::size_t p = 0; p < Qf; ++p) b += tf[p] * m.blocks.f.at(p);
      break;
    case RbSolver::PetrovSupremizer:
      if (!m.blocks.has_supremizers()) throw ReducedSolveError("reduced model has no supremizer components");
      for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
          double s = 0.0;
          for (std::size_t a = 0; a < Qb; ++a)
            for (std::size_t c = 0; c < Qb; ++c) s += tb[a] * tb[c] * m.blocks.T(i * Qb + a, j * Qb + c);
          A(i, j) = s;
        }
        double s = 0.0;
        for (std::size_t p = 0; p < Qf; ++p)
          for (std::size_t a = 0; a < Qb; ++a) s += tf[p] * tb[a] * m.blocks.Feta(p, i * Qb + a);
        b[i] = s;
      }
      break;
    case RbSolver::NormalEq:
      // l2 residual minimization over the test box, from the estimator Gramians.
      for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
          double s = 0.0;
          for (std::size_t a = 0; a < Qb; ++a)
            for (std::size_t c = 0; c < Qb; ++c) s += tb[a] * tb[c] * m.gram.Cbb(i * Qb + a, j * Qb + c);
          A(i, j) = s;
        }
        double s = 0.0;
        for (std::size_t p = 0; p < Qf; ++p)
          for (std::size_t a = 0; a < Qb; ++a) s += tf[p] * tb[a] * m.gram.Cfb(p, i * Qb + a);
        b[i] = s;
      }
      break;
  }
  return {A, b};
}

ReducedSolution reduced_solve(const ReducedModel& m, const ParameterPoint& mu, std::optional<RbSolver> solver) {
  const RbSolver s = solver.value_or(m.solver);
  ReducedSolution out{mu, {}, s};
  if (m.N() == 0) return out;
  auto [A, b] = reduced_assemble(m, mu, s);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double rc = lu.rcond();
  if (!(rc > 1e-14)) throw ReducedSolveError("reduced system is singular to working precision (rcond " +
                                             std::to_string(rc) + ")");
  out.u = to_std(lu.solve(b));
  return out;
}

double estimate(const ReducedModel& m, const ParameterPoint& mu, const std::vector<double>& u) {
  return error_bound(mu, m.theta_f(mu), m.theta_b(mu), u, m.gram, m.spec.bounds);
}

double discrete_infsup(const ReducedModel& m, const ParameterPoint& mu, std::optional<RbSolver> solver) {
  const RbSolver s = solver.value_or(m.solver);
  if (m.N() == 0) return 0.0;
  const Eigen::MatrixXd Lx = chol(m.blocks.gram);
  Eigen::MatrixXd A = reduced_assemble(m, mu, s).first;
  Eigen::MatrixXd Ly;
  switch (s) {
    case RbSolver::Galerkin: Ly = Lx; break;
    // Both systems are Gram matrices of the mu-dependent test functions, so
    // the test norm of the reduced operator equals the system matrix itself.
    case RbSolver::PetrovSupremizer:
    case RbSolver::NormalEq: Ly = chol(0.5 * (A + A.transpose())); break;
  }
  // sigma_min(Ly^{-1} A Lx^{-T})
  Eigen::MatrixXd K = Ly.triangularView<Eigen::Lower>().solve(A);
  K = Lx.triangularView<Eigen::Lower>().solve(K.transpose()).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
  return svd.singularValues().minCoeff();
}

double snapshot_residual_ratio(const ReducedSpace& space, std::size_t i) {
  const ReducedModel& m = space.model();
  if (i >= m.N()) throw std::out_of_range("snapshot index");
  const auto& mu = m.samples[i];
  const Discretization& F = space.problem().fine();
  const auto tb = m.theta_b(mu);
  const auto f = F.rhs(mu);
  auto combine = [&](const Eigen::VectorXd& c) {
    std::vector<double> x(F.trial().size(), 0.0);
    for (Eigen::Index k = 0; k < c.size(); ++k) axpy(c[k], space.basis()[k], x);
    auto r = F.grid().apply(tb, x);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = f[k] - r[k];
    return norm2(r);
  };
  const auto uN = reduced_solve(m, mu).u;
  const double den = combine(m.coords.col(static_cast<Eigen::Index>(i)));
  if (!(den > 0.0)) throw std::domain_error("snapshot has zero residual");
  return combine(Eigen::Map<const Eigen::VectorXd>(uN.data(), static_cast<Eigen::Index>(uN.size()))) / den;
}

// ---------------------------------------------------------------------------

ReducedSpace::ReducedSpace(const ProblemInstance& P, double trunc_tol, bool orthonormalize, bool keep_snapshots)
    : P_(&P),
      gb_(P.fine(), trunc_tol, P.riesz()),
      orthonormalize_(orthonormalize),
      keep_snapshots_(keep_snapshots) {
  model_.spec = P.spec();
  model_.solver = P.spec().solver;
  model_.orthonormal = orthonormalize;
  model_.gram = gb_.gramians();
  model_.blocks.B.assign(P.rb_operator().op().size(), Eigen::MatrixXd(0, 0));
  model_.blocks.f.assign(P.rb_operator().functional().size(), Eigen::VectorXd(0));
  model_.blocks.gram.resize(0, 0);
  model_.coords.resize(0, 0);
}

void ReducedSpace::add_snapshot(const Snapshot& s) {
  const auto n = static_cast<Eigen::Index>(Z_.size());
  const double xnorm = norm2(s.x);
  if (!(xnorm > 0.0)) throw DependentSnapshot("zero snapshot");
  Eigen::VectorXd col = Eigen::VectorXd::Zero(n + 1);
  std::vector<double> z = s.x;
  if (orthonormalize_) {
    // Gram-Schmidt with one reorthogonalization pass.
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < n; ++k) {
        const double h = dot(Z_[k], z);
        axpy(-h, Z_[k], z);
        col[k] += h;
      }
    const double r = norm2(z);
    if (r < 1e-10 * xnorm) throw DependentSnapshot("snapshot is numerically dependent on the basis");
    for (double& v : z) v /= r;
    col[n] = r;
  } else {
    if (n > 0) {
      Eigen::VectorXd b(n);
      for (Eigen::Index k = 0; k < n; ++k) b[k] = dot(Z_[k], z);
      const Eigen::VectorXd c = model_.blocks.gram.ldlt().solve(b);
      const double r2 = xnorm * xnorm - b.dot(c);
      if (r2 < 1e-20 * xnorm * xnorm) throw DependentSnapshot("snapshot is numerically dependent on the basis");
    }
    col[n] = 1.0;
  }

  // Reduced blocks with the rb operator.
  const Discretization& D = P_->rb_operator();
  const std::size_t Qb = D.op().size();
  model_.blocks.gram.conservativeResize(n + 1, n + 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double g = dot(Z_[k], z);
    model_.blocks.gram(k, n) = g;
    model_.blocks.gram(n, k) = g;
  }
  model_.blocks.gram(n, n) = dot(z, z);
  for (std::size_t q = 0; q < Qb; ++q) {
    std::vector<double> w(Qb, 0.0);
    w[q] = 1.0;
    const auto Az = D.grid().apply(w, z);            // b_q(z_new, .)
    const auto Atz = D.grid().apply_transpose(w, z);  // b_q(., z_new)
    auto& B = model_.blocks.B[q];
    B.conservativeResize(n + 1, n + 1);
    for (Eigen::Index k = 0; k < n; ++k) {
      B(k, n) = dot(Z_[k], Az);
      B(n, k) = dot(Z_[k], Atz);
    }
    B(n, n) = dot(z, Az);
  }
  for (std::size_t p = 0; p < model_.blocks.f.size(); ++p) {
    auto& f = model_.blocks.f[p];
    f.conservativeResize(n + 1);
    f[n] = dot(D.loads()[p], z);
  }

  // Snapshot coordinates: upper triangular in the orthonormal case.
  model_.coords.conservativeResize(n + 1, n + 1);
  model_.coords.row(n).setZero();
  model_.coords.col(n) = col;

  gb_.append(z);
  model_.gram = gb_.gramians();
  Z_.push_back(std::move(z));
  model_.samples.push_back(s.mu);
  model_.eps.push_back(s.eps);
  if (keep_snapshots_) {
    snaps_.push_back(s);
    model_.snapshots.push_back(s.coeffs(P_->fine().trial()));
  }
  if (model_.blocks.has_supremizers()) compute_test_components(last_eta_tol_, last_eta_cfg_);
}

void ReducedSpace::compute_test_components(double tol, const AwgmConfig& cfg) {
  last_eta_tol_ = tol;
  last_eta_cfg_ = cfg;
  const Discretization& F = P_->fine();
  const std::size_t Qb = F.op().size(), Qf = F.functional().size(), N = Z_.size();
  const auto& cols = gb_.columns();
  for (std::size_t c = eta_.size(); c < N * Qb; ++c) {
    eta_.push_back(riesz_solve(P_->gramian(), cols[c], tol, cfg));
    ++riesz_solves_;
  }
  const auto M = static_cast<Eigen::Index>(N * Qb);
  auto& T = model_.blocks.T;
  auto& Feta = model_.blocks.Feta;
  T.resize(M, M);
  Feta.resize(static_cast<Eigen::Index>(Qf), M);
  for (Eigen::Index r = 0; r < M; ++r) {
    for (Eigen::Index c = 0; c < M; ++c) T(r, c) = dot(eta_[r], cols[c]);
    for (std::size_t p = 0; p < Qf; ++p) Feta(static_cast<Eigen::Index>(p), r) = dot(F.loads()[p], eta_[r]);
  }
}

}  // namespace awrb
