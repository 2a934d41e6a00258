#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "awrb/grid.hpp"
#include "awrb/linalg.hpp"
#include "awrb/operator.hpp"

namespace awrb {

enum class ErrorMeasure { XNorm, DualResidual, NormalEqResidual };

std::string to_string(ErrorMeasure m);
ErrorMeasure measure_from_string(const std::string& s);

// Parent and child positions per direction of a universe, for multitree
// bookkeeping on dense masks.
struct TreeTables {
  explicit TreeTables(const Universe& u);
  std::array<std::vector<std::vector<int>>, 2> parents, children;
  std::array<std::vector<int>, 2> level;
  std::vector<std::size_t> by_level_desc;  // flat positions, total level descending
};

// An affine problem discretized on the level-capped boxes of its trial and
// test spaces.  Operators on sub-boxes are built on demand and cached.
class Discretization {
 public:
  Discretization(AffineBilinearOperator op, AffineFunctional rhs, ParameterBox box, std::array<int, 2> levels,
                 DomainPolicy policy = DomainPolicy::Warn);

  const AffineBilinearOperator& op() const { return op_; }
  const AffineFunctional& functional() const { return rhs_; }
  const ParameterBox& box() const { return box_; }
  DomainPolicy policy() const { return policy_; }
  std::array<int, 2> levels() const { return levels_; }
  const Universe& trial() const { return grid().trial(); }
  const Universe& test() const { return grid().test(); }
  // Trial and test bases coincide, so the operator is square on every box.
  bool square() const { return square_; }

  const GridOperator& grid() const { return *full_; }
  const GridOperator& grid(std::array<int, 2> levels) const;
  const TreeTables& tables() const;

  std::vector<double> theta_b(const ParameterPoint& mu) const;
  std::vector<double> theta_f(const ParameterPoint& mu) const;
  // Load vectors of the functional components over the test box.
  const std::vector<std::vector<double>>& loads() const { return loads_; }
  std::vector<double> rhs(const ParameterPoint& mu) const;
  std::vector<double> combine_loads(const std::vector<double>& theta_f) const;

 private:
  AffineBilinearOperator op_;
  AffineFunctional rhs_;
  ParameterBox box_;
  std::array<int, 2> levels_;
  DomainPolicy policy_;
  bool square_ = false;
  std::unique_ptr<GridOperator> full_;
  std::vector<std::vector<double>> loads_;
  mutable std::mutex mutex_;
  mutable std::map<std::array<int, 2>, std::unique_ptr<GridOperator>> cache_;
  mutable std::unique_ptr<TreeTables> tables_;
};

// Index set over a universe, stored as a mask.
class ActiveSet {
 public:
  ActiveSet() = default;
  explicit ActiveSet(const Universe& u) : u_(&u), mask_(u.size(), 0) {}
  ActiveSet(const Universe& u, const IndexSet& s);

  const Universe& universe() const { return *u_; }
  bool contains(std::size_t p) const { return mask_[p] != 0; }
  bool insert(std::size_t p);
  std::size_t size() const { return count_; }
  const std::vector<char>& mask() const { return mask_; }
  std::vector<std::size_t> positions() const;
  IndexSet to_index_set() const;
  // Largest level per direction among the members (0 for an empty set).
  std::array<int, 2> max_levels() const;

 private:
  const Universe* u_ = nullptr;
  std::vector<char> mask_;
  std::size_t count_ = 0;
};

// Adds all overlapping coarser indices, slice-wise, until the set is a multitree.
void complete(ActiveSet& s, const TreeTables& t);
// Adds the children of every member in both directions, then completes.
// Members above the per-direction caps are not added.
void extend_children(ActiveSet& s, const TreeTables& t, std::array<int, 2> caps);

// One fixed-parameter linear system.  With normal = true the Galerkin
// systems are those of B^T B x = B^T rhs (the coordinate form of B'R_Y B).
struct AwgmSystem {
  const Discretization* disc = nullptr;
  std::vector<double> weights;
  std::vector<double> rhs;  // over the test box
  bool normal = false;
};

AwgmSystem make_system(const Discretization& disc, const ParameterPoint& mu, bool normal);
// The normal-equation form of the problem at mu.
AwgmSystem normal_equation_wrap(const Discretization& disc, const ParameterPoint& mu);

struct AwgmConfig {
  double c = 0.6;              // bulk fraction
  double omega = 0.5;          // residual accuracy
  double inner_factor = 0.1;   // inner CG tolerance relative to the current residual
  int max_outer = 200;
  int max_cg = 20000;
  std::array<int, 2> L_max{12, 12};
  double riesz_lower = 1.0;    // c_Psi of the test basis (DualResidual stop)
  double inv_stability = 1.0;  // estimate of ||A^{-1}|| (XNorm stop)
  void validate() const;
};

struct IterationRecord {
  std::size_t set_size = 0;
  std::size_t xi_size = 0;
  double residual = 0.0;
  int cg_iterations = 0;
  double seconds = 0.0;
};

struct SolveReport {
  std::vector<IterationRecord> iterations;
  double target = 0.0;          // bound on the stopping quantity
  double final_residual = 0.0;  // final stopping quantity
  bool converged = false;
  bool level_cap_hit = false;   // the set reached the top level of a direction
  double seconds = 0.0;
};

void to_json(nlohmann::json& j, const IterationRecord& r);
void to_json(nlohmann::json& j, const SolveReport& r);

struct Snapshot {
  ParameterPoint mu;
  double eps = 0.0;
  ErrorMeasure measure = ErrorMeasure::DualResidual;
  std::vector<double> x;  // over the trial box, zero outside the active set
  std::size_t support = 0;
  SolveReport report;
  CoeffVector coeffs(const Universe& trial) const { return trial.to_sparse(x); }
};

// Error raised when the outer loop stops before reaching its target.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, Snapshot partial) : std::runtime_error(what), partial(std::move(partial)) {}
  Snapshot partial;
};

// Residual of the Galerkin system over the whole trial box:  rhs - A x for
// square systems, B^T (rhs - B x) in normal mode.  Optionally returns the
// test-box residual rhs - B x.
std::vector<double> full_residual(const AwgmSystem& sys, const std::vector<double>& x,
                                  std::vector<double>* primal = nullptr);

// CG on the Galerkin system restricted to the set, warm-started from x (which
// must vanish outside the set); stops at ||r_set|| <= abs_tol.
CgResult galerkin_solve_on_set(const AwgmSystem& sys, const ActiveSet& set, std::vector<double>& x, double abs_tol,
                               int max_iter = 20000);
// Sparse convenience form with a relative tolerance.
CoeffVector galerkin_solve_on_set(const AwgmSystem& sys, const IndexSet& set, double rel_tol);

struct ResidualApproximation {
  std::vector<double> r;  // full residual restricted to xi (zero elsewhere)
  ActiveSet xi;
  double full_norm = 0.0;       // ||r_full||
  double restricted_norm = 0.0; // ||r|_xi||
  double defect = 0.0;          // ||r_full - r|_xi||
  bool capped = false;          // the whole box was needed
};

// The smallest children extension xi of the set (a multitree) with
// ||r_full - r|_xi|| <= omega ||r|_xi||.
ResidualApproximation approximate_residual(const AwgmSystem& sys, const std::vector<double>& x, const ActiveSet& set,
                                           double omega, std::array<int, 2> caps = {99, 99});

// Adds the largest residual entries until ||r|_set|| >= c ||r||, then completes.
void bulk_chase(const std::vector<double>& r, ActiveSet& set, double c, const TreeTables& t);
IndexSet bulk_chase(const CoeffVector& r, const IndexSet& set, double c, const TensorBasis& basis);

// Adaptive solve until the stopping quantity is below target (in the units
// of the residual the system measures).
Snapshot solve_to_target(const AwgmSystem& sys, double target, const AwgmConfig& cfg, ErrorMeasure measure);

// SOLVE: snapshot at mu with stopping quantity <= eps for the given measure.
// DualResidual stops on ||rhs - B x|| <= c_Psi eps, NormalEqResidual on
// ||B^T (rhs - B x)|| <= eps, XNorm on ||A^{-1}|| ||r|| <= eps.
Snapshot solve(const Discretization& disc, const ParameterPoint& mu, double eps, ErrorMeasure measure,
               const AwgmConfig& cfg);

// Adaptive solve of the Gramian system G w = g to residual tolerance tol.
std::vector<double> riesz_solve(const Discretization& gramian, const std::vector<double>& g, double tol,
                                const AwgmConfig& cfg = {});

// Dense matrix of the weighted operator over the boxes (rows: test).
Eigen::MatrixXd dense_operator(const GridOperator& op, const std::vector<double>& weights);

}  // namespace awrb
