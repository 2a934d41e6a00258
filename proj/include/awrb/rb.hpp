#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "awrb/estimator.hpp"
#include "awrb/problems.hpp"

namespace awrb {

// Parameter-independent reduced quantities.  With N basis functions, Q_b
// operator and Q_f load components:
//   B[q](i,j)      = b_q(zeta_j, zeta_i)                (tested with the trial basis)
//   f[p](i)        = f_p(zeta_i)
//   T((i,q'),(j,q)) = b_q(zeta_j, eta_{i,q'})            (supremizer pairings)
//   Feta(p,(i,q')) = f_p(eta_{i,q'})
// with flat index i*Q_b + q.
struct ReducedBlocks {
  std::vector<Eigen::MatrixXd> B;
  std::vector<Eigen::VectorXd> f;
  Eigen::MatrixXd gram;  // l2 Gram matrix of the basis
  Eigen::MatrixXd T;
  Eigen::MatrixXd Feta;
  bool has_supremizers() const { return T.size() > 0; }
};

struct ReducedModel {
  ProblemSpec spec;
  RbSolver solver = RbSolver::Galerkin;
  bool orthonormal = true;
  std::vector<ParameterPoint> samples;
  std::vector<double> eps;          // snapshot tolerances
  Eigen::MatrixXd coords;           // column i: snapshot i in the basis
  ReducedBlocks blocks;
  OfflineGramians gram;
  DeltaConstants delta;
  double tol = 0.0;
  bool converged = false;
  std::vector<CoeffVector> snapshots;  // optional fine data (inspection)

  std::size_t N() const { return samples.size(); }
  // The model built from the first n basis functions.
  ReducedModel prefix(std::size_t n) const;
  std::vector<double> theta_b(const ParameterPoint& mu, DomainPolicy p = DomainPolicy::Warn) const;
  std::vector<double> theta_f(const ParameterPoint& mu, DomainPolicy p = DomainPolicy::Warn) const;
};

struct ReducedSolution {
  ParameterPoint mu;
  std::vector<double> u;
  RbSolver solver = RbSolver::Galerkin;
};

class ReducedSolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DependentSnapshot : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reduced system at mu, from blocks and theta values only.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> reduced_assemble(const ReducedModel& m, const ParameterPoint& mu,
                                                             RbSolver solver);
// Dense LU solve; condition numbers above 1e14 raise ReducedSolveError.
ReducedSolution reduced_solve(const ReducedModel& m, const ParameterPoint& mu, std::optional<RbSolver> solver = {});
// Error surrogate of a reduced state.
double estimate(const ReducedModel& m, const ParameterPoint& mu, const std::vector<double>& u);
// beta_N(mu): smallest singular value of the reduced matrix normalized by
// the Cholesky factors of the trial and test Gram matrices.
double discrete_infsup(const ReducedModel& m, const ParameterPoint& mu, std::optional<RbSolver> solver = {});

class ReducedSpace;
// |r(u_N(mu^i))| / |r(zeta_i)|: l2 norms of the fine residuals over the test
// box.  Computed from fine vectors because the snapshot residuals lie below
// the cancellation floor of the Gramian form.
double snapshot_residual_ratio(const ReducedSpace& space, std::size_t i);

// Offline construction of the reduced space.
class ReducedSpace {
 public:
  ReducedSpace(const ProblemInstance& P, double trunc_tol, bool orthonormalize = true, bool keep_snapshots = false);

  // Appends a snapshot; near-dependent snapshots (relative projection
  // residual below 1e-10) raise DependentSnapshot.
  void add_snapshot(const Snapshot& s);
  // Supremizer components eta_{i,q} by adaptive Riesz solves to tolerance tol.
  void compute_test_components(double tol, const AwgmConfig& cfg = {});

  std::size_t size() const { return Z_.size(); }
  const ReducedModel& model() const { return model_; }
  ReducedModel& model() { return model_; }
  const std::vector<std::vector<double>>& basis() const { return Z_; }
  const std::vector<Snapshot>& snapshots() const { return snaps_; }
  const std::vector<std::vector<double>>& eta() const { return eta_; }
  const GramianBuilder& gramians() const { return gb_; }
  std::size_t riesz_solves() const { return riesz_solves_; }
  const ProblemInstance& problem() const { return *P_; }

 private:
  const ProblemInstance* P_;
  GramianBuilder gb_;
  bool orthonormalize_;
  bool keep_snapshots_;
  std::vector<std::vector<double>> Z_;
  std::vector<Snapshot> snaps_;
  std::vector<std::vector<double>> eta_;  // index i*Q_b + q
  std::size_t riesz_solves_ = 0;
  double last_eta_tol_ = 0.0;
  AwgmConfig last_eta_cfg_;
  ReducedModel model_;
};

}  // namespace awrb
