#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "awrb/rb.hpp"

namespace awrb {

struct GreedyConfig {
  double tol = 1e-4;
  std::size_t N_max = 50;
  std::vector<ParameterPoint> train;
  ErrorMeasure measure = ErrorMeasure::DualResidual;
  EpsilonRule rule = EpsilonRule::OptimalResidualRule;
  RbSolver solver = RbSolver::Galerkin;
  std::optional<double> c_delta, C_delta;  // overrides of the derived constants
  std::optional<double> constant_eps;      // replaces the rule (diagnostics)
  double trunc_tol = 1e-8;
  bool orthonormalize = true;
  bool keep_snapshots = false;
  double eta_tol_factor = 1e-2;  // supremizer Riesz solves: tolerance relative to eps
  AwgmConfig awgm;
  int threads = 1;
  std::function<void(const std::string&)> log;  // progress lines (optional)

  void validate() const;
};

// Greedy settings of a problem preset (tolerance, training preset "train").
GreedyConfig default_greedy_config(const ProblemSpec& p, double tol = 1e-4);

// eps(mu) = tol c_Delta / C(mu) for the rule.
double epsilon_of_mu(EpsilonRule rule, const ParameterPoint& mu, double tol, double c_delta, double C_delta,
                     const StabilityBounds& bounds);

struct GreedyRecord {
  std::size_t N = 0;              // basis size after adding the snapshot
  ParameterPoint mu;
  double max_estimator = 0.0;     // sweep maximum that selected mu (basis size N - 1)
  std::size_t argmax = 0;         // grid position of mu
  double eps = 0.0;
  std::size_t support = 0;
  double ratio = 0.0;             // deterioration ratio with the basis of size N
  double c_delta = 0.0, C_delta = 0.0;
  int outer_iterations = 0;
  double seconds_sweep = 0.0, seconds_solve = 0.0, seconds_update = 0.0;
};

struct GreedyTrace {
  std::vector<GreedyRecord> records;
  double final_max = 0.0;          // last sweep maximum
  std::size_t final_argmax = 0;
  double final_c_delta = 0.0, final_C_delta = 0.0;
  bool converged = false;
  bool multiple_selection = false;
  std::string stop_reason;
  std::vector<double> final_ratios;  // deterioration ratios with the final basis
  double seconds = 0.0;
};

void to_json(nlohmann::json& j, const GreedyRecord& r);
void to_json(nlohmann::json& j, const GreedyTrace& t);
std::string trace_csv(const GreedyTrace& t);

// Error estimates of the model over a parameter list (parallel sweep).
std::vector<double> sweep_estimates(const ReducedModel& m, const std::vector<ParameterPoint>& grid, int threads = 1);
// First position of the largest value.
std::size_t argmax_first(const std::vector<double>& v);

// Snapshot solver failure during training.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, GreedyTrace partial)
      : std::runtime_error(what), partial(std::move(partial)) {}
  GreedyTrace partial;
};

std::pair<ReducedModel, GreedyTrace> train(const ProblemInstance& P, const GreedyConfig& cfg);

struct TestsetRow {
  std::size_t N = 0;
  double max = 0.0;
  std::size_t argmax = 0;
  ParameterPoint argmax_mu;
  double mean = 0.0;
  double seconds = 0.0;  // online time for the whole grid
};

struct TestsetResult {
  std::vector<TestsetRow> rows;  // N = 0 .. N_final
  const TestsetRow& final() const { return rows.back(); }
};

TestsetResult evaluate_testset(const ReducedModel& m, const std::vector<ParameterPoint>& grid, int threads = 1,
                               bool all_prefixes = true);
std::string testset_csv(const TestsetResult& r);

}  // namespace awrb
