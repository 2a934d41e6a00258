#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "awrb/awgm.hpp"

namespace awrb {

// Two-sided l2 equivalence of the scaled test basis in the Y norm:
// c^2 |v|^2 <= v^T G_Y v <= C^2 |v|^2.  For a functional g with dual
// coefficients (g_lambda) this gives |g| / C <= ||g||_{Y'} <= |g| / c.
struct RieszConstants {
  double c = 1.0;
  double C = 1.0;
};

void to_json(nlohmann::json& j, const RieszConstants& r);
void from_json(const nlohmann::json& j, RieszConstants& r);

// Extreme eigenvalues of the Gramian over its whole box by Lanczos.
RieszConstants riesz_constants(const Discretization& gramian, int max_iter = 600, double tol = 1e-8);

// Parameter-dependent stability constants.
struct StabilityBounds {
  enum class Kind {
    Constant,      // beta = alpha = beta0, gamma = gamma0
    ThermalBlock,  // alpha = min(1, mu1), gamma = max(1, mu1)
    CdrProxy       // beta = beta0 min(1, a) / max(1, g), a = 1 + min(0, mu2 + mu1/2)/pi^2, g = 1 + |mu1|/(2 pi) + |mu2|/pi^2
  };
  Kind kind = Kind::Constant;
  double beta0 = 1.0;
  double gamma0 = 1.0;

  double beta_lb(const ParameterPoint& mu) const;
  double gamma_ub(const ParameterPoint& mu) const;
  double alpha_lb(const ParameterPoint& mu) const;  // coercive problems; equals beta_lb
  bool coercive() const { return kind != Kind::CdrProxy; }
};

void to_json(nlohmann::json& j, const StabilityBounds& b);
void from_json(const nlohmann::json& j, StabilityBounds& b);

// Snapshot tolerance rules.
enum class EpsilonRule { NormRule, EllipticNormRule, EllipticResidualRule, OptimalResidualRule, NormalEqResidualRule };
std::string to_string(EpsilonRule r);
EpsilonRule rule_from_string(const std::string& s);

struct OfflineGramians {
  std::size_t N = 0, Qb = 0, Qf = 0;
  Eigen::MatrixXd Cff;  // Qf x Qf
  Eigen::MatrixXd Cfb;  // Qf x (N Qb), column j*Qb + q
  Eigen::MatrixXd Cbb;  // (N Qb) x (N Qb)
  double trunc_tol = 1e-8;
  RieszConstants riesz;
};

// Coefficient decay diagnostic for a vector over a universe.  level_max[l]
// is the largest modulus among indices whose largest level is l; the tail
// beyond the box is extrapolated geometrically from the last two levels.
struct TailReport {
  std::vector<double> level_max;
  double tail = 0.0;
  bool flagged = false;  // tail above trunc_tol (the level cap is too low)
};
TailReport tail_check(const Universe& u, const std::vector<double>& coeffs, double trunc_tol);

// Dual pairings <f_q, psi_lambda> over the test box.
std::vector<double> rhs_coeffs(const Discretization& disc, std::size_t q, double trunc_tol, TailReport* tail = nullptr);
// Dual pairings b_q(zeta, psi_lambda) over the test box.
std::vector<double> column_coeffs(const Discretization& disc, const std::vector<double>& zeta, std::size_t q,
                                  double trunc_tol, TailReport* tail = nullptr);

// Incremental offline Gramians; appending a basis function computes only
// the new rows and columns.
class GramianBuilder {
 public:
  GramianBuilder(const Discretization& disc, double trunc_tol, RieszConstants riesz);
  void append(const std::vector<double>& zeta);
  const OfflineGramians& gramians() const { return g_; }
  // Keeps the first n basis functions only.
  OfflineGramians prefix(std::size_t n) const;
  bool tail_flagged() const { return tail_flagged_; }
  // Column vectors b_q(zeta_j, .) over the test box, index j*Qb + q.
  const std::vector<std::vector<double>>& columns() const { return cols_; }

 private:
  const Discretization* disc_;
  OfflineGramians g_;
  std::vector<std::vector<double>> cols_;
  bool tail_flagged_ = false;
};

OfflineGramians build_gramians(const Discretization& disc, const std::vector<std::vector<double>>& basis,
                               double trunc_tol, RieszConstants riesz);

// |g(mu) - B(mu) u_N|_{l2} from the Gramians only.
double residual_l2(const std::vector<double>& theta_f, const std::vector<double>& theta_b,
                   const std::vector<double>& u_N, const OfflineGramians& G);
// Lower surrogate of ||f(mu) - B(mu) u_N||_{Y'}:  residual_l2 / C_Psi.
double surrogate_dual_norm(const std::vector<double>& theta_f, const std::vector<double>& theta_b,
                           const std::vector<double>& u_N, const OfflineGramians& G);
// surrogate_dual_norm / beta_LB(mu).
double error_bound(const ParameterPoint& mu, const std::vector<double>& theta_f, const std::vector<double>& theta_b,
                   const std::vector<double>& u_N, const OfflineGramians& G, const StabilityBounds& bounds);

// Equivalence constants of the surrogate:  c_Delta = c/C (1 - t),
// C_Delta = 1 + t, t = trunc_tol / max_estimator.
struct DeltaConstants {
  double c_delta = 1.0;
  double C_delta = 1.0;
  double trunc_factor = 0.0;
};
DeltaConstants delta_constants(const RieszConstants& r, double trunc_tol, double max_estimator);

}  // namespace awrb
