#include "awrb/greedy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace awrb {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string mu_str(const ParameterPoint& mu) {
  std::string s = "(";
  for (std::size_t i = 0; i < mu.size(); ++i) s += (i ? ", " : "") + fmt(mu[i]);
  return s + ")";
}

// Runs f(i) for i in [0, n) on up to `threads` workers; results are written
// by index so the outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  const std::size_t T = std::clamp<std::size_t>(threads > 0 ? threads : 1, 1, std::max<std::size_t>(n, 1));
  if (T == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(T);
  for (std::size_t t = 0; t < T; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += T) f(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void GreedyConfig::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("greedy: tolerance must be positive");
  if (N_max < 1) throw std::invalid_argument("greedy: N_max must be at least 1");
  if (train.empty()) throw std::invalid_argument("greedy: empty training grid");
  if (c_delta && !(*c_delta > 0.0)) throw std::invalid_argument("greedy: c_delta must be positive");
  if (C_delta && !(*C_delta > 0.0)) throw std::invalid_argument("greedy: C_delta must be positive");
  if (constant_eps && !(*constant_eps > 0.0)) throw std::invalid_argument("greedy: constant eps must be positive");
  awgm.validate();
}

GreedyConfig default_greedy_config(const ProblemSpec& p, double tol) {
  GreedyConfig c;
  c.tol = tol;
  c.train = p.preset("train").points;
  c.measure = p.measure;
  c.rule = p.rule;
  c.solver = p.solver;
  c.awgm.L_max = p.levels;
  // The apply costs O(#box) whatever the set, so a large bulk fraction
  // (fewer outer iterations) is cheaper than small sets.
  c.awgm.c = 0.9;
  return c;
}

double epsilon_of_mu(EpsilonRule rule, const ParameterPoint& mu, double tol, double c_delta, double C_delta,
                     const StabilityBounds& bounds) {
  const double beta = bounds.beta_lb(mu), gamma = bounds.gamma_ub(mu);
  if (!(beta > 0.0) || !(gamma > 0.0)) throw std::domain_error("epsilon_of_mu: nonpositive stability bounds");
  double C = 0.0;
  switch (rule) {
    case EpsilonRule::NormRule: C = C_delta * gamma * gamma / (beta * beta); break;
    case EpsilonRule::EllipticNormRule:
    case EpsilonRule::EllipticResidualRule: {
      if (!bounds.coercive())
        throw std::invalid_argument("epsilon_of_mu: " + to_string(rule) + " requires a coercive problem");
      const double alpha = bounds.alpha_lb(mu);
      C = rule == EpsilonRule::EllipticNormRule ? C_delta * std::pow(gamma / alpha, 1.5)
                                                 : C_delta * std::sqrt(gamma) / std::pow(alpha, 1.5);
      break;
    }
    case EpsilonRule::OptimalResidualRule: C = C_delta / beta; break;
    case EpsilonRule::NormalEqResidualRule: C = C_delta / (beta * beta); break;
  }
  return tol * c_delta / C;
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[k]) k = i;
  return k;
}

std::vector<double> sweep_estimates(const ReducedModel& m, const std::vector<ParameterPoint>& grid, int threads) {
  std::vector<double> est(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const auto u = reduced_solve(m, grid[i]).u;
    est[i] = estimate(m, grid[i], u);
  });
  return est;
}

std::pair<ReducedModel, GreedyTrace> train(const ProblemInstance& P, const GreedyConfig& cfg) {
  cfg.validate();
  const auto t_start = Clock::now();
  auto say = [&](const std::string& s) {
    if (cfg.log) cfg.log(s);
  };
  const RieszConstants riesz = P.riesz();
  ReducedSpace space(P, cfg.trunc_tol, cfg.orthonormalize, cfg.keep_snapshots);
  space.model().solver = cfg.solver;
  space.model().tol = cfg.tol;
  const StabilityBounds& bounds = P.spec().bounds;
  GreedyTrace trace;

  for (;;) {
    const ReducedModel& model = space.model();
    const auto t_sweep = Clock::now();
    const auto est = sweep_estimates(model, cfg.train, cfg.threads);
    const double sweep_seconds = since(t_sweep);
    const std::size_t k = argmax_first(est);
    const double mx = est[k];
    DeltaConstants d = delta_constants(riesz, cfg.trunc_tol, mx);
    if (cfg.c_delta) d.c_delta = *cfg.c_delta;
    if (cfg.C_delta) d.C_delta = *cfg.C_delta;
    trace.final_max = mx;
    trace.final_argmax = k;
    trace.final_c_delta = d.c_delta;
    trace.final_C_delta = d.C_delta;
    space.model().delta = d;
    const ParameterPoint& mu = cfg.train[k];
    say("N=" + std::to_string(model.N()) + " max estimator " + fmt(mx) + " at " + mu_str(mu));

    if (mx < d.c_delta * cfg.tol) {
      trace.converged = true;
      trace.stop_reason = "tolerance";
      break;
    }
    if (std::find(model.samples.begin(), model.samples.end(), mu) != model.samples.end()) {
      trace.multiple_selection = true;
      trace.converged = true;
      trace.stop_reason = "multiple selection";
      break;
    }
    if (model.N() >= cfg.N_max) {
      trace.stop_reason = "N_max";
      break;
    }

    GreedyRecord rec;
    rec.mu = mu;
    rec.max_estimator = mx;
    rec.argmax = k;
    rec.c_delta = d.c_delta;
    rec.C_delta = d.C_delta;
    rec.seconds_sweep = sweep_seconds;
    rec.eps = cfg.constant_eps ? *cfg.constant_eps : epsilon_of_mu(cfg.rule, mu, cfg.tol, d.c_delta, d.C_delta, bounds);

    AwgmConfig acfg = cfg.awgm;
    acfg.riesz_lower = riesz.c;
    acfg.inv_stability = 1.0 / bounds.beta_lb(mu);
    const auto t_solve = Clock::now();
    Snapshot snap;
    try {
      snap = solve(P.fine(), mu, rec.eps, cfg.measure, acfg);
    } catch (const SolveError& e) {
      trace.stop_reason = std::string("snapshot solve failed: ") + e.what();
      trace.seconds = since(t_start);
      throw TrainingError(trace.stop_reason, trace);
    }
    rec.seconds_solve = since(t_solve);
    rec.support = snap.support;
    rec.outer_iterations = static_cast<int>(snap.report.iterations.size());

    const auto t_update = Clock::now();
    try {
      space.add_snapshot(snap);
    } catch (const DependentSnapshot&) {
      trace.multiple_selection = true;
      trace.converged = true;
      trace.stop_reason = "dependent snapshot";
      break;
    }
    if (cfg.solver == RbSolver::PetrovSupremizer)
      space.compute_test_components(cfg.eta_tol_factor * rec.eps, cfg.awgm);
    rec.N = space.size();
    rec.ratio = snapshot_residual_ratio(space, rec.N - 1);
    rec.seconds_update = since(t_update);
    say("  added " + mu_str(mu) + " eps " + fmt(rec.eps) + " support " + std::to_string(rec.support) + " ratio " +
        fmt(rec.ratio) + " solve " + fmt(rec.seconds_solve) + "s");
    trace.records.push_back(rec);
  }

  ReducedModel& m = space.model();
  m.converged = trace.converged;
  for (std::size_t i = 0; i < m.N(); ++i) trace.final_ratios.push_back(snapshot_residual_ratio(space, i));
  trace.seconds = since(t_start);
  return {m, trace};
}

TestsetResult evaluate_testset(const ReducedModel& m, const std::vector<ParameterPoint>& grid, int threads,
                               bool all_prefixes) {
  TestsetResult r;
  const std::size_t first = all_prefixes ? 0 : m.N();
  for (std::size_t n = first; n <= m.N(); ++n) {
    const ReducedModel pm = n == m.N() ? m : m.prefix(n);
    const auto t0 = Clock::now();
    const auto est = sweep_estimates(pm, grid, threads);
    TestsetRow row;
    row.seconds = since(t0);
    row.N = n;
    if (!est.empty()) {
      row.argmax = argmax_first(est);
      row.max = est[row.argmax];
      row.argmax_mu = grid[row.argmax];
      row.mean = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
    }
    r.rows.push_back(row);
  }
  return r;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const GreedyRecord& r) {
  j = {{"N", r.N},
       {"mu", r.mu},
       {"max_estimator", r.max_estimator},
       {"argmax", r.argmax},
       {"eps", r.eps},
       {"support", r.support},
       {"ratio", r.ratio},
       {"c_delta", r.c_delta},
       {"C_delta", r.C_delta},
       {"outer_iterations", r.outer_iterations},
       {"seconds_sweep", r.seconds_sweep},
       {"seconds_solve", r.seconds_solve},
       {"seconds_update", r.seconds_update}};
}

void to_json(nlohmann::json& j, const GreedyTrace& t) {
  j = {{"records", t.records},
       {"final_max", t.final_max},
       {"final_argmax", t.final_argmax},
       {"final_c_delta", t.final_c_delta},
       {"final_C_delta", t.final_C_delta},
       {"converged", t.converged},
       {"multiple_selection", t.multiple_selection},
       {"stop_reason", t.stop_reason},
       {"final_ratios", t.final_ratios},
       {"seconds", t.seconds}};
}

std::string trace_csv(const GreedyTrace& t) {
  std::ostringstream os;
  const std::size_t P = t.records.empty() ? 0 : t.records.front().mu.size();
  os << "N";
  for (std::size_t i = 0; i < P; ++i) os << ",mu" << i + 1;
  os << ",max_estimator,ratio,final_ratio,eps_mu,support_size,seconds\n";
  for (std::size_t r = 0; r < t.records.size(); ++r) {
    const auto& rec = t.records[r];
    os << rec.N;
    for (double v : rec.mu) os << ',' << fmt(v);
    os << ',' << fmt(rec.max_estimator) << ',' << fmt(rec.ratio) << ','
       << (r < t.final_ratios.size() ? fmt(t.final_ratios[r]) : std::string("nan")) << ',' << fmt(rec.eps) << ','
       << rec.support << ',' << fmt(rec.seconds_sweep + rec.seconds_solve + rec.seconds_update) << '\n';
  }
  return os.str();
}

std::string testset_csv(const TestsetResult& r) {
  std::ostringstream os;
  os << "N,max_estimator,mean_estimator,argmax,seconds\n";
  for (auto& row : r.rows)
    os << row.N << ',' << fmt(row.max) << ',' << fmt(row.mean) << ',' << row.argmax << ',' << fmt(row.seconds) << '\n';
  return os.str();
}

}  // namespace awrb
