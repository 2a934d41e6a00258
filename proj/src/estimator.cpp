#include "awrb/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace awrb {

void to_json(nlohmann::json& j, const RieszConstants& r) { j = {{"c", r.c}, {"C", r.C}}; }

void from_json(const nlohmann::json& j, RieszConstants& r) {
  r.c = j.at("c").get<double>();
  r.C = j.at("C").get<double>();
}

RieszConstants riesz_constants(const Discretization& gramian, int max_iter, double tol) {
  const GridOperator& G = gramian.grid();
  if (!gramian.square()) throw std::invalid_argument("riesz_constants: the Gramian must be square");
  const auto w = gramian.theta_b({});
  const int n = static_cast<int>(G.trial().size());
  LinearMap op = [&](const std::vector<double>& in, std::vector<double>& out) {
    out.resize(in.size());
    G.apply(w, in.data(), out.data());
  };
  const EigenBounds e = lanczos_extremes(n, op, max_iter, tol);
  if (!(e.min > 0.0)) throw std::runtime_error("riesz_constants: Gramian is not positive definite");
  return {std::sqrt(e.min), std::sqrt(e.max)};
}

// ---------------------------------------------------------------------------

namespace {

const char* kind_name(StabilityBounds::Kind k) {
  switch (k) {
    case StabilityBounds::Kind::Constant: return "constant";
    case StabilityBounds::Kind::ThermalBlock: return "thermal-block";
    case StabilityBounds::Kind::CdrProxy: return "cdr-proxy";
  }
  return "?";
}

}  // namespace

double StabilityBounds::beta_lb(const ParameterPoint& mu) const {
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  switch (kind) {
    case Kind::Constant: return beta0;
    case Kind::ThermalBlock: return std::min(1.0, mu.at(0));
    case Kind::CdrProxy: {
      const double a = 1.0 + std::min(0.0, mu.at(1) + 0.5 * mu.at(0)) / pi2;
      const double g = 1.0 + 0.5 * std::abs(mu.at(0)) / std::numbers::pi + std::abs(mu.at(1)) / pi2;
      return beta0 * std::min(1.0, a) / std::max(1.0, g);
    }
  }
  return beta0;
}

double StabilityBounds::gamma_ub(const ParameterPoint& mu) const {
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  switch (kind) {
    case Kind::Constant: return gamma0;
    case Kind::ThermalBlock: return std::max(1.0, mu.at(0));
    case Kind::CdrProxy:
      return gamma0 * (1.0 + 0.5 * std::abs(mu.at(0)) / std::numbers::pi + std::abs(mu.at(1)) / pi2);
  }
  return gamma0;
}

double StabilityBounds::alpha_lb(const ParameterPoint& mu) const {
  if (!coercive()) throw std::logic_error("stability bounds: no coercivity constant for this problem");
  return beta_lb(mu);
}

void to_json(nlohmann::json& j, const StabilityBounds& b) {
  j = {{"kind", kind_name(b.kind)}, {"beta0", b.beta0}, {"gamma0", b.gamma0}};
}

void from_json(const nlohmann::json& j, StabilityBounds& b) {
  const auto k = j.at("kind").get<std::string>();
  if (k == "constant") b.kind = StabilityBounds::Kind::Constant;
  else if (k == "thermal-block") b.kind = StabilityBounds::Kind::ThermalBlock;
  else if (k == "cdr-proxy") b.kind = StabilityBounds::Kind::CdrProxy;
  else throw std::invalid_argument("unknown stability bound kind: " + k);
  b.beta0 = j.value("beta0", 1.0);
  b.gamma0 = j.value("gamma0", 1.0);
}

std::string to_string(EpsilonRule r) {
  switch (r) {
    case EpsilonRule::NormRule: return "NormRule";
    case EpsilonRule::EllipticNormRule: return "EllipticNormRule";
    case EpsilonRule::EllipticResidualRule: return "EllipticResidualRule";
    case EpsilonRule::OptimalResidualRule: return "OptimalResidualRule";
    case EpsilonRule::NormalEqResidualRule: return "NormalEqResidualRule";
  }
  return "?";
}

EpsilonRule rule_from_string(const std::string& s) {
  for (auto r : {EpsilonRule::NormRule, EpsilonRule::EllipticNormRule, EpsilonRule::EllipticResidualRule,
                 EpsilonRule::OptimalResidualRule, EpsilonRule::NormalEqResidualRule})
    if (to_string(r) == s) return r;
  throw std::invalid_argument("unknown epsilon rule: " + s);
}

// ---------------------------------------------------------------------------

TailReport tail_check(const Universe& u, const std::vector<double>& coeffs, double trunc_tol) {
  TailReport t;
  const int top = std::max(u.L[0], u.L[1]);
  t.level_max.assign(top + 1, 0.0);
  std::vector<int> lev0(u.n[0]), lev1(u.n[1], 0);
  for (int p = 0; p < u.n[0]; ++p) lev0[p] = u.basis.b[0].at_position(p).j;
  if (u.dim() == 2)
    for (int p = 0; p < u.n[1]; ++p) lev1[p] = u.basis.b[1].at_position(p).j;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const int l = std::max(lev0[i / u.n[1]], lev1[i % u.n[1]]);
    t.level_max[l] = std::max(t.level_max[l], std::abs(coeffs[i]));
  }
  if (top >= 1 && t.level_max[top - 1] > 0.0) {
    const double q = t.level_max[top] / t.level_max[top - 1];
    t.tail = q < 1.0 ? t.level_max[top] * q / (1.0 - q) : INFINITY;
  } else {
    t.tail = t.level_max[top];
  }
  t.flagged = t.tail > trunc_tol;
  return t;
}

std::vector<double> rhs_coeffs(const Discretization& disc, std::size_t q, double trunc_tol, TailReport* tail) {
  const auto& v = disc.loads().at(q);
  if (tail) *tail = tail_check(disc.test(), v, trunc_tol);
  return v;
}

std::vector<double> column_coeffs(const Discretization& disc, const std::vector<double>& zeta, std::size_t q,
                                  double trunc_tol, TailReport* tail) {
  std::vector<double> w(disc.op().size(), 0.0);
  w.at(q) = 1.0;
  auto v = disc.grid().apply(w, zeta);
  if (tail) *tail = tail_check(disc.test(), v, trunc_tol);
  return v;
}

GramianBuilder::GramianBuilder(const Discretization& disc, double trunc_tol, RieszConstants riesz) : disc_(&disc) {
  g_.Qb = disc.op().size();
  g_.Qf = disc.functional().size();
  g_.trunc_tol = trunc_tol;
  g_.riesz = riesz;
  g_.Cff.resize(g_.Qf, g_.Qf);
  for (std::size_t a = 0; a < g_.Qf; ++a)
    for (std::size_t b = 0; b < g_.Qf; ++b) g_.Cff(a, b) = dot(disc.loads()[a], disc.loads()[b]);
  g_.Cfb.resize(g_.Qf, 0);
  g_.Cbb.resize(0, 0);
  for (std::size_t q = 0; q < g_.Qf; ++q) {
    TailReport t;
    rhs_coeffs(disc, q, trunc_tol, &t);
    tail_flagged_ = tail_flagged_ || t.flagged;
  }
}

void GramianBuilder::append(const std::vector<double>& zeta) {
  const std::size_t Qb = g_.Qb, old = cols_.size(), M = old + Qb;
  for (std::size_t q = 0; q < Qb; ++q) {
    TailReport t;
    cols_.push_back(column_coeffs(*disc_, zeta, q, g_.trunc_tol, &t));
    tail_flagged_ = tail_flagged_ || t.flagged;
  }
  g_.Cfb.conservativeResize(g_.Qf, M);
  g_.Cbb.conservativeResize(M, M);
  for (std::size_t c = old; c < M; ++c) {
    for (std::size_t a = 0; a < g_.Qf; ++a) g_.Cfb(a, c) = dot(disc_->loads()[a], cols_[c]);
    for (std::size_t r = 0; r <= c; ++r) {
      const double v = dot(cols_[r], cols_[c]);
      g_.Cbb(r, c) = v;
      g_.Cbb(c, r) = v;
    }
  }
  ++g_.N;
}

OfflineGramians GramianBuilder::prefix(std::size_t n) const {
  if (n > g_.N) throw std::out_of_range("gramians: prefix longer than the basis");
  OfflineGramians p = g_;
  p.N = n;
  p.Cfb = g_.Cfb.leftCols(n * g_.Qb);
  p.Cbb = g_.Cbb.topLeftCorner(n * g_.Qb, n * g_.Qb);
  return p;
}

OfflineGramians build_gramians(const Discretization& disc, const std::vector<std::vector<double>>& basis,
                               double trunc_tol, RieszConstants riesz) {
  GramianBuilder b(disc, trunc_tol, riesz);
  for (auto& z : basis) b.append(z);
  return b.gramians();
}

double residual_l2(const std::vector<double>& theta_f, const std::vector<double>& theta_b,
                   const std::vector<double>& u_N, const OfflineGramians& G) {
  if (theta_f.size() != G.Qf || theta_b.size() != G.Qb || u_N.size() != G.N)
    throw std::invalid_argument("surrogate: dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> tf(theta_f.data(), G.Qf);
  Eigen::VectorXd w(G.N * G.Qb);
  for (std::size_t j = 0; j < G.N; ++j)
    for (std::size_t q = 0; q < G.Qb; ++q) w[j * G.Qb + q] = u_N[j] * theta_b[q];
  const double ff = tf.dot(G.Cff * tf);
  const double fb = G.N ? tf.dot(G.Cfb * w) : 0.0;
  const double bb = G.N ? w.dot(G.Cbb * w) : 0.0;
  const double rad = ff - 2.0 * fb + bb;
  const double scale = std::max({std::abs(ff), std::abs(bb), 1e-300});
  if (rad < -1e-8 * scale) throw std::runtime_error("surrogate: negative radicand beyond roundoff");
  // Cancellation limits the relative accuracy to about 1e-16 * scale; the
  // radicand is clamped at zero inside that band.
  return std::sqrt(std::max(0.0, rad));
}

double surrogate_dual_norm(const std::vector<double>& theta_f, const std::vector<double>& theta_b,
                           const std::vector<double>& u_N, const OfflineGramians& G) {
  return residual_l2(theta_f, theta_b, u_N, G) / G.riesz.C;
}

double error_bound(const ParameterPoint& mu, const std::vector<double>& theta_f, const std::vector<double>& theta_b,
                   const std::vector<double>& u_N, const OfflineGramians& G, const StabilityBounds& bounds) {
  const double beta = bounds.beta_lb(mu);
  if (!(beta > 0.0)) throw std::domain_error("error_bound: nonpositive stability bound");
  return surrogate_dual_norm(theta_f, theta_b, u_N, G) / beta;
}

DeltaConstants delta_constants(const RieszConstants& r, double trunc_tol, double max_estimator) {
  DeltaConstants d;
  d.trunc_factor = max_estimator > 0.0 ? std::min(0.5, trunc_tol / max_estimator) : 0.5;
  d.c_delta = r.c / r.C * (1.0 - d.trunc_factor);
  d.C_delta = 1.0 + d.trunc_factor;
  return d;
}

}  // namespace awrb
