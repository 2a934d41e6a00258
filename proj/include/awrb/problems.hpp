#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "awrb/awgm.hpp"
#include "awrb/estimator.hpp"

namespace awrb {

enum class RbSolver { Galerkin, PetrovSupremizer, NormalEq };
std::string to_string(RbSolver s);
RbSolver solver_from_string(const std::string& s);

struct GridPreset {
  std::string name;
  std::vector<ParameterPoint> points;  // first coordinate outermost
};

// Tensor grid of the given coordinate values.
std::vector<ParameterPoint> tensor_grid(const std::vector<std::vector<double>>& axes);
std::vector<double> log_spaced(double lo, double hi, int n);
std::vector<double> uniform_spaced(double lo, double hi, int n);

struct ProblemSpec {
  std::string name;
  AffineBilinearOperator op;           // trial X, test Y
  AffineBilinearOperator galerkin_op;  // same forms tested with the trial basis
  AffineBilinearOperator y_gramian;    // Y inner product on the test basis
  AffineFunctional rhs;
  ParameterBox box;
  ParameterBox experiment_box;
  StabilityBounds bounds;
  ErrorMeasure measure = ErrorMeasure::DualResidual;
  EpsilonRule rule = EpsilonRule::OptimalResidualRule;
  RbSolver solver = RbSolver::Galerkin;
  std::array<int, 2> levels{8, 8};
  std::vector<GridPreset> presets;

  const GridPreset& preset(const std::string& name) const;
};

void to_json(nlohmann::json& j, const ProblemSpec& p);
void from_json(const nlohmann::json& j, ProblemSpec& p);

// Two-subdomain thermal block with nine source positions.
ProblemSpec thermal_block(std::array<int, 2> levels = {8, 8});
// Time-periodic convection-diffusion-reaction problem in space-time form;
// time is direction 0.  With calibrate = true the stability proxy constants
// are computed by dense inf-sup evaluations on a small box.
ProblemSpec cdr_spacetime(std::array<int, 2> levels = {6, 6}, bool calibrate = true);
// -u'' = 1 on (0,1), homogeneous Dirichlet conditions.
ProblemSpec poisson_1d(int L);
// -u'' + 5u' + u = 1 on (0,1), homogeneous Dirichlet conditions (non-symmetric).
ProblemSpec toy_1d(int L);
// Preset by name: thermal-block, cdr, poisson-1d, toy-1d.
ProblemSpec make_problem(const std::string& name, std::optional<std::array<int, 2>> levels = std::nullopt);

struct InfSupSample {
  ParameterPoint mu;
  double beta = 0.0;   // sqrt(lambda_min(B^T G_Y^{-1} B))
  double gamma = 0.0;  // sqrt(lambda_max(B^T G_Y^{-1} B))
};
// Discrete inf-sup and continuity constants with the l2 norm on trial
// coefficients and the Y norm on the test side, by dense evaluation.
std::vector<InfSupSample> dense_infsup(const ProblemSpec& p, std::array<int, 2> levels,
                                       const std::vector<ParameterPoint>& mus);

// Fine-scale objects of a problem.
class ProblemInstance {
 public:
  explicit ProblemInstance(ProblemSpec spec, DomainPolicy policy = DomainPolicy::Warn);
  const ProblemSpec& spec() const { return spec_; }
  const Discretization& fine() const { return *fine_; }
  // Operator for reduced blocks (tested with the trial basis).
  const Discretization& rb_operator() const { return galerkin_ ? *galerkin_ : *fine_; }
  const Discretization& gramian() const { return *gramian_; }
  // Riesz constants of the test basis in Y (computed on first use).
  RieszConstants riesz() const;
  void set_riesz(RieszConstants r);

 private:
  ProblemSpec spec_;
  std::unique_ptr<Discretization> fine_, galerkin_, gramian_;
  mutable std::mutex mutex_;
  mutable std::optional<RieszConstants> riesz_;
};

}  // namespace awrb
