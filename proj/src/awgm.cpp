#include "awrb/awgm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace awrb {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool same_scaling(const Scaling& a, const Scaling& b) { return a.type == b.type && a.time_dir == b.time_dir; }

}  // namespace

std::string to_string(ErrorMeasure m) {
  switch (m) {
    case ErrorMeasure::XNorm: return "XNorm";
    case ErrorMeasure::DualResidual: return "DualResidual";
    case ErrorMeasure::NormalEqResidual: return "NormalEqResidual";
  }
  return "?";
}

ErrorMeasure measure_from_string(const std::string& s) {
  if (s == "XNorm") return ErrorMeasure::XNorm;
  if (s == "DualResidual") return ErrorMeasure::DualResidual;
  if (s == "NormalEqResidual") return ErrorMeasure::NormalEqResidual;
  throw std::invalid_argument("unknown error measure: " + s);
}

// ---------------------------------------------------------------------------

TreeTables::TreeTables(const Universe& u) {
  for (int d = 0; d < 2; ++d) {
    const int n = u.n[d];
    parents[d].assign(n, {});
    children[d].assign(n, {});
    level[d].assign(n, 0);
    if (d >= u.dim()) continue;
    const auto& B = u.basis.b[d];
    for (int p = 0; p < n; ++p) {
      const auto idx = B.at_position(p);
      level[d][p] = idx.j;
      if (idx.j < u.L[d])
        for (auto& q : B.children(idx)) children[d][p].push_back(B.position(q));
    }
    // Overlap is symmetric, so parents are the inverted child lists.
    for (int p = 0; p < n; ++p)
      for (int c : children[d][p]) parents[d][c].push_back(p);
  }
  const int top = u.L[0] + u.L[1];
  std::vector<std::vector<std::size_t>> bucket(top + 1);
  for (int p0 = 0; p0 < u.n[0]; ++p0)
    for (int p1 = 0; p1 < u.n[1]; ++p1)
      bucket[level[0][p0] + level[1][p1]].push_back(static_cast<std::size_t>(p0) * u.n[1] + p1);
  for (int t = top; t >= 0; --t) by_level_desc.insert(by_level_desc.end(), bucket[t].begin(), bucket[t].end());
}

// ---------------------------------------------------------------------------

Discretization::Discretization(AffineBilinearOperator op, AffineFunctional rhs, ParameterBox box,
                               std::array<int, 2> levels, DomainPolicy policy)
    : op_(std::move(op)), rhs_(std::move(rhs)), box_(std::move(box)), levels_(levels), policy_(policy) {
  if (op_.trial.basis.dim == 1) levels_[1] = 0;
  full_ = std::make_unique<GridOperator>(op_, levels_);
  square_ = same_scaling(op_.trial.scaling, op_.test.scaling);
  for (int d = 0; d < op_.trial.basis.dim; ++d)
    square_ = square_ && op_.trial.basis.b[d].spec() == op_.test.basis.b[d].spec();
  for (auto& c : rhs_.components) loads_.push_back(grid_load(c, full_->test(), op_.test.scaling));
}

const GridOperator& Discretization::grid(std::array<int, 2> levels) const {
  if (op_.trial.basis.dim == 1) levels[1] = 0;
  if (levels == levels_) return *full_;
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = cache_[levels];
  if (!slot) slot = std::make_unique<GridOperator>(op_, levels);
  return *slot;
}

const TreeTables& Discretization::tables() const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!tables_) tables_ = std::make_unique<TreeTables>(full_->trial());
  return *tables_;
}

std::vector<double> Discretization::theta_b(const ParameterPoint& mu) const {
  return evaluate_thetas(op_.thetas, mu, box_, policy_);
}

std::vector<double> Discretization::theta_f(const ParameterPoint& mu) const {
  return evaluate_thetas(rhs_.thetas, mu, box_, policy_);
}

std::vector<double> Discretization::combine_loads(const std::vector<double>& theta_f) const {
  if (theta_f.size() != loads_.size()) throw std::invalid_argument("discretization: load weight count mismatch");
  std::vector<double> f(test().size(), 0.0);
  for (std::size_t q = 0; q < loads_.size(); ++q)
    if (theta_f[q] != 0.0) axpy(theta_f[q], loads_[q], f);
  return f;
}

std::vector<double> Discretization::rhs(const ParameterPoint& mu) const { return combine_loads(theta_f(mu)); }

// ---------------------------------------------------------------------------

ActiveSet::ActiveSet(const Universe& u, const IndexSet& s) : ActiveSet(u) {
  for (auto& t : s) insert(u.flat(t));
}

bool ActiveSet::insert(std::size_t p) {
  if (mask_[p]) return false;
  mask_[p] = 1;
  ++count_;
  return true;
}

std::vector<std::size_t> ActiveSet::positions() const {
  std::vector<std::size_t> out;
  out.reserve(count_);
  for (std::size_t p = 0; p < mask_.size(); ++p)
    if (mask_[p]) out.push_back(p);
  return out;
}

IndexSet ActiveSet::to_index_set() const {
  std::vector<TensorIndex> v;
  v.reserve(count_);
  for (std::size_t p = 0; p < mask_.size(); ++p)
    if (mask_[p]) v.push_back(u_->index(p));
  return IndexSet(std::move(v));
}

std::array<int, 2> ActiveSet::max_levels() const {
  std::array<int, 2> lev{0, 0};
  const int n1 = u_->n[1];
  std::vector<char> row(u_->n[0], 0), col(n1, 0);
  for (std::size_t p = 0; p < mask_.size(); ++p)
    if (mask_[p]) {
      row[p / n1] = 1;
      col[p % n1] = 1;
    }
  for (int d = 0; d < u_->dim(); ++d) {
    const auto& flags = d == 0 ? row : col;
    for (int q = static_cast<int>(flags.size()) - 1; q >= 0; --q)
      if (flags[q]) {
        lev[d] = u_->basis.b[d].at_position(q).j;
        break;
      }
  }
  return lev;
}

void complete(ActiveSet& s, const TreeTables& t) {
  const int n1 = s.universe().n[1];
  for (std::size_t p : t.by_level_desc) {
    if (!s.contains(p)) continue;
    const int p0 = static_cast<int>(p / n1), p1 = static_cast<int>(p % n1);
    for (int q : t.parents[0][p0]) s.insert(static_cast<std::size_t>(q) * n1 + p1);
    for (int q : t.parents[1][p1]) s.insert(static_cast<std::size_t>(p0) * n1 + q);
  }
}

void extend_children(ActiveSet& s, const TreeTables& t, std::array<int, 2> caps) {
  const int n1 = s.universe().n[1];
  for (std::size_t p : s.positions()) {
    const int p0 = static_cast<int>(p / n1), p1 = static_cast<int>(p % n1);
    for (int q : t.children[0][p0])
      if (t.level[0][q] <= caps[0]) s.insert(static_cast<std::size_t>(q) * n1 + p1);
    for (int q : t.children[1][p1])
      if (t.level[1][q] <= caps[1]) s.insert(static_cast<std::size_t>(p0) * n1 + q);
  }
  complete(s, t);
}

// ---------------------------------------------------------------------------

AwgmSystem make_system(const Discretization& disc, const ParameterPoint& mu, bool normal) {
  if (!normal && !disc.square())
    throw std::invalid_argument("awgm: a non-square problem needs the normal-equation form");
  return AwgmSystem{&disc, disc.theta_b(mu), disc.rhs(mu), normal};
}

AwgmSystem normal_equation_wrap(const Discretization& disc, const ParameterPoint& mu) {
  return make_system(disc, mu, true);
}

void AwgmConfig::validate() const {
  if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("awgm: bulk fraction c must lie in (0,1)");
  if (!(omega > 0.0 && omega < 1.0)) throw std::invalid_argument("awgm: omega must lie in (0,1)");
  if (!(inner_factor > 0.0 && inner_factor < 1.0)) throw std::invalid_argument("awgm: inner_factor must lie in (0,1)");
  if (max_outer < 1 || max_cg < 1) throw std::invalid_argument("awgm: iteration caps must be positive");
  if (!(riesz_lower > 0.0) || !(inv_stability > 0.0)) throw std::invalid_argument("awgm: constants must be positive");
}

void to_json(nlohmann::json& j, const IterationRecord& r) {
  j = {{"set_size", r.set_size}, {"xi_size", r.xi_size}, {"residual", r.residual},
       {"cg_iterations", r.cg_iterations}, {"seconds", r.seconds}};
}

void to_json(nlohmann::json& j, const SolveReport& r) {
  j = {{"iterations", r.iterations}, {"target", r.target},         {"final_residual", r.final_residual},
       {"converged", r.converged},   {"level_cap_hit", r.level_cap_hit}, {"seconds", r.seconds}};
}

// ---------------------------------------------------------------------------

std::vector<double> full_residual(const AwgmSystem& sys, const std::vector<double>& x, std::vector<double>* primal) {
  const GridOperator& G = sys.disc->grid();
  std::vector<double> rb = G.apply(sys.weights, x);
  for (std::size_t i = 0; i < rb.size(); ++i) rb[i] = sys.rhs[i] - rb[i];
  if (!sys.normal) {
    if (primal) *primal = rb;
    return rb;
  }
  std::vector<double> r = G.apply_transpose(sys.weights, rb);
  if (primal) *primal = std::move(rb);
  return r;
}

CgResult galerkin_solve_on_set(const AwgmSystem& sys, const ActiveSet& set, std::vector<double>& x, double abs_tol,
                               int max_iter) {
  const Discretization& disc = *sys.disc;
  const Universe& U = disc.trial();
  const auto& mask = set.mask();
  if (x.size() != U.size()) x.assign(U.size(), 0.0);

  if (sys.normal) {
    const GridOperator& G = disc.grid();
    std::vector<double> b = G.apply_transpose(sys.weights, sys.rhs);
    std::vector<double> inv = G.normal_diagonal(sys.weights);
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!mask[i]) b[i] = 0.0, inv[i] = 0.0, x[i] = 0.0;
      else inv[i] = inv[i] > 0.0 ? 1.0 / inv[i] : 0.0;
    }
    std::vector<double> y(G.test().size());
    LinearMap op = [&](const std::vector<double>& in, std::vector<double>& out) {
      G.apply(sys.weights, in.data(), y.data());
      out.resize(in.size());
      G.apply_transpose(sys.weights, y.data(), out.data());
      for (std::size_t i = 0; i < out.size(); ++i)
        if (!mask[i]) out[i] = 0.0;
    };
    return conjugate_gradient(op, b, x, abs_tol, max_iter, inv);
  }

  // Square systems: the entries do not depend on the box, so the smallest
  // box holding the set gives the same restricted matrix at lower cost.
  const GridOperator& G = disc.grid(set.max_levels());
  const Universe& S = G.trial();
  const int n1 = U.n[1], s1 = S.n[1];
  std::vector<std::size_t> map;  // sub-box position -> full position, members only
  std::vector<double> xs(S.size(), 0.0), bs(S.size(), 0.0), inv(S.size(), 0.0);
  std::vector<char> sm(S.size(), 0);
  const auto diag = G.diagonal(sys.weights);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    const std::size_t q = (p / n1) * s1 + p % n1;
    sm[q] = 1;
    xs[q] = x[p];
    bs[q] = sys.rhs[p];
    inv[q] = diag[q] > 0.0 ? 1.0 / diag[q] : 0.0;
  }
  LinearMap op = [&](const std::vector<double>& in, std::vector<double>& out) {
    out.resize(in.size());
    G.apply(sys.weights, in.data(), out.data());
    for (std::size_t i = 0; i < out.size(); ++i)
      if (!sm[i]) out[i] = 0.0;
  };
  CgResult res;
  try {
    res = conjugate_gradient(op, bs, xs, abs_tol, max_iter, inv);
  } catch (const CgStagnation& e) {
    xs = e.last_iterate;
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t q = 0; q < xs.size(); ++q)
      if (sm[q]) x[(q / s1) * n1 + q % s1] = xs[q];
    throw CgStagnation(e.what(), x, e.last_residual);
  }
  std::fill(x.begin(), x.end(), 0.0);
  for (std::size_t q = 0; q < xs.size(); ++q)
    if (sm[q]) x[(q / s1) * n1 + q % s1] = xs[q];
  return res;
}

CoeffVector galerkin_solve_on_set(const AwgmSystem& sys, const IndexSet& set, double rel_tol) {
  const Universe& U = sys.disc->trial();
  ActiveSet s(U, set);
  std::vector<double> x(U.size(), 0.0);
  double bnorm = 0.0;
  if (sys.normal) {
    auto b = sys.disc->grid().apply_transpose(sys.weights, sys.rhs);
    for (std::size_t p = 0; p < b.size(); ++p)
      if (s.contains(p)) bnorm += b[p] * b[p];
  } else {
    for (std::size_t p = 0; p < sys.rhs.size(); ++p)
      if (s.contains(p)) bnorm += sys.rhs[p] * sys.rhs[p];
  }
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) return CoeffVector{};
  galerkin_solve_on_set(sys, s, x, rel_tol * bnorm);
  return U.to_sparse(x);
}

ResidualApproximation approximate_residual(const AwgmSystem& sys, const std::vector<double>& x, const ActiveSet& set,
                                           double omega, std::array<int, 2> caps) {
  const Discretization& disc = *sys.disc;
  const auto& T = disc.tables();
  ResidualApproximation out;
  const auto r = full_residual(sys, x);
  double total = 0.0;
  for (double v : r) total += v * v;
  out.full_norm = std::sqrt(total);
  out.xi = set;
  complete(out.xi, T);
  for (;;) {
    double inside = 0.0;
    for (std::size_t p = 0; p < r.size(); ++p)
      if (out.xi.contains(p)) inside += r[p] * r[p];
    out.restricted_norm = std::sqrt(inside);
    out.defect = std::sqrt(std::max(0.0, total - inside));
    if (out.defect <= omega * out.restricted_norm || total == 0.0) break;
    const std::size_t before = out.xi.size();
    extend_children(out.xi, T, caps);
    if (out.xi.size() == before) {
      out.capped = true;
      break;
    }
  }
  out.r.assign(r.size(), 0.0);
  for (std::size_t p = 0; p < r.size(); ++p)
    if (out.xi.contains(p)) out.r[p] = r[p];
  return out;
}

void bulk_chase(const std::vector<double>& r, ActiveSet& set, double c, const TreeTables& t) {
  double total = 0.0, inside = 0.0;
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t p = 0; p < r.size(); ++p) {
    const double v = r[p] * r[p];
    total += v;
    if (set.contains(p)) inside += v;
    else if (v > 0.0) cand.push_back({v, p});
  }
  const double need = c * c * total;
  std::sort(cand.begin(), cand.end(), [](auto& a, auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (auto& [v, p] : cand) {
    if (inside >= need) break;
    set.insert(p);
    inside += v;
  }
  complete(set, t);
}

IndexSet bulk_chase(const CoeffVector& r, const IndexSet& set, double c, const TensorBasis& basis) {
  double total = 0.0, inside = 0.0;
  std::vector<std::pair<double, TensorIndex>> cand;
  for (auto& [t, v] : r) {
    total += v * v;
    if (set.contains(t)) inside += v * v;
    else if (v != 0.0) cand.push_back({v * v, t});
  }
  std::stable_sort(cand.begin(), cand.end(), [](auto& a, auto& b) { return a.first > b.first; });
  IndexSet out = set;
  for (auto& [v, t] : cand) {
    if (inside >= c * c * total) break;
    out.insert(t);
    inside += v;
  }
  return multitree_completion(out, basis);
}

// ---------------------------------------------------------------------------

Snapshot solve_to_target(const AwgmSystem& sys, double target, const AwgmConfig& cfg, ErrorMeasure measure) {
  cfg.validate();
  if (!(target > 0.0)) throw std::invalid_argument("awgm: target must be positive");
  const auto t0 = Clock::now();
  const Discretization& disc = *sys.disc;
  const Universe& U = disc.trial();
  const auto& T = disc.tables();
  std::array<int, 2> caps{std::min(cfg.L_max[0], U.L[0]), std::min(cfg.L_max[1], U.L[1])};

  Snapshot snap;
  snap.measure = measure;
  snap.x.assign(U.size(), 0.0);
  snap.report.target = target;
  if (std::all_of(sys.rhs.begin(), sys.rhs.end(), [](double v) { return v == 0.0; })) {
    snap.report.converged = true;
    return snap;
  }

  // Coarsest level in every direction.
  ActiveSet set(U);
  for (std::size_t p = 0; p < U.size(); ++p)
    if (T.level[0][p / U.n[1]] == 0 && T.level[1][p % U.n[1]] == 0) set.insert(p);

  const bool primal_stop = measure == ErrorMeasure::DualResidual && sys.normal;
  std::vector<double> rb;
  double prev = norm2(full_residual(sys, snap.x, &rb));
  bool saturated = false;
  for (int k = 0; k < cfg.max_outer; ++k) {
    const auto tk = Clock::now();
    IterationRecord rec;
    rec.set_size = set.size();
    const double abs_tol = saturated ? 0.1 * target : std::max(0.1 * target, cfg.inner_factor * prev);
    try {
      rec.cg_iterations = galerkin_solve_on_set(sys, set, snap.x, abs_tol, cfg.max_cg).iterations;
    } catch (const CgStagnation& e) {
      snap.x = e.last_iterate;
      snap.report.seconds = seconds_since(t0);
      throw SolveError(std::string("awgm: inner solver failed: ") + e.what(), snap);
    }
    auto approx = approximate_residual(sys, snap.x, set, cfg.omega, caps);
    double q = approx.full_norm;
    if (primal_stop) {
      full_residual(sys, snap.x, &rb);
      q = norm2(rb);
    }
    rec.residual = q;
    rec.xi_size = approx.xi.size();
    rec.seconds = seconds_since(tk);
    snap.report.iterations.push_back(rec);
    prev = approx.full_norm;
    const auto lev = set.max_levels();
    for (int d = 0; d < U.dim(); ++d)
      if (lev[d] >= caps[d]) snap.report.level_cap_hit = true;
    if (q <= target) {
      snap.report.converged = true;
      snap.report.final_residual = q;
      break;
    }
    const std::size_t before = set.size();
    bulk_chase(approx.r, set, cfg.c, T);
    if (set.size() == before) {
      // Nothing left to add within the caps: only the inner solve can improve.
      if (saturated) {
        snap.report.final_residual = q;
        break;
      }
      saturated = true;
    }
  }
  for (double v : snap.x) snap.support += v != 0.0;
  snap.report.seconds = seconds_since(t0);
  if (!snap.report.converged) {
    if (!snap.report.iterations.empty()) snap.report.final_residual = snap.report.iterations.back().residual;
    throw SolveError("awgm: target not reached (outer iteration or level cap)", snap);
  }
  return snap;
}

Snapshot solve(const Discretization& disc, const ParameterPoint& mu, double eps, ErrorMeasure measure,
               const AwgmConfig& cfg) {
  if (!(eps > 0.0)) throw std::invalid_argument("awgm: eps must be positive");
  const bool normal = measure == ErrorMeasure::NormalEqResidual || !disc.square();
  AwgmSystem sys = make_system(disc, mu, normal);
  double target = eps;
  if (measure == ErrorMeasure::DualResidual) target = cfg.riesz_lower * eps;
  if (measure == ErrorMeasure::XNorm) target = eps / cfg.inv_stability;
  Snapshot s = solve_to_target(sys, target, cfg, measure);
  s.mu = mu;
  s.eps = eps;
  return s;
}

std::vector<double> riesz_solve(const Discretization& gramian, const std::vector<double>& g, double tol,
                                const AwgmConfig& cfg) {
  AwgmSystem sys{&gramian, gramian.theta_b({}), g, false};
  return solve_to_target(sys, tol, cfg, ErrorMeasure::XNorm).x;
}

Eigen::MatrixXd dense_operator(const GridOperator& op, const std::vector<double>& weights) {
  const std::size_t n = op.trial().size(), m = op.test().size();
  Eigen::MatrixXd A(m, n);
  std::vector<double> e(n, 0.0), y(m);
  for (std::size_t c = 0; c < n; ++c) {
    e[c] = 1.0;
    op.apply(weights, e.data(), y.data());
    e[c] = 0.0;
    for (std::size_t r = 0; r < m; ++r) A(r, c) = y[r];
  }
  return A;
}

}  // namespace awrb
