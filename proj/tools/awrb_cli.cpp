// Command-line front end: train, evaluate, sweep, inspect, selftest.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "awrb/greedy.hpp"
#include "awrb/model_io.hpp"
#include "awrb/selftest.hpp"

namespace fs = std::filesystem;
using namespace awrb;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kUsage = 2;
constexpr int kUnconverged = 3;
constexpr int kSelftestFailed = 4;

int env_threads() {
  if (const char* s = std::getenv("AWRB_THREADS")) {
    try {
      const int t = std::stoi(s);
      if (t > 0) return t;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid AWRB_THREADS='" << s << "'\n";
  }
  return 1;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << s;
}

// "a,b" -> {a, b}
ParameterPoint parse_point(const std::string& s) {
  ParameterPoint mu;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      mu.push_back(std::stod(tok, &used));
      if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad parameter value '" + tok + "' in '" + s + "'");
    }
  }
  if (mu.empty()) throw std::invalid_argument("empty parameter point");
  return mu;
}

// One point per line, comma separated; blank lines and lines starting with
// '#' or a letter (header) are skipped.
std::vector<ParameterPoint> read_grid(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read grid file " + path);
  std::vector<ParameterPoint> g;
  std::string line;
  while (std::getline(f, line)) {
    const auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '#' || std::isalpha(static_cast<unsigned char>(line[p]))) continue;
    if (line.back() == '\r') line.pop_back();
    g.push_back(parse_point(line));
  }
  return g;
}

ProblemSpec load_problem(const std::string& arg, const std::vector<int>& levels) {
  std::optional<std::array<int, 2>> L;
  if (levels.size() == 1) L = std::array<int, 2>{levels[0], levels[0]};
  if (levels.size() >= 2) L = std::array<int, 2>{levels[0], levels[1]};
  if (fs::is_regular_file(arg)) {
    std::ifstream f(arg);
    ProblemSpec p = nlohmann::json::parse(f).get<ProblemSpec>();
    if (L) throw std::invalid_argument("--levels cannot be combined with a problem file");
    return p;
  }
  return make_problem(arg, L);
}

std::vector<ParameterPoint> grid_of(const ProblemSpec& spec, const std::string& preset, const std::string& file) {
  if (!file.empty()) return read_grid(file);
  return spec.preset(preset).points;
}

void check_dims(const ProblemSpec& spec, const std::vector<ParameterPoint>& grid) {
  for (auto& mu : grid)
    if (mu.size() != spec.box.dim())
      throw std::invalid_argument("parameter point has " + std::to_string(mu.size()) + " coordinates, problem has " +
                                  std::to_string(spec.box.dim()));
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string problem = "thermal-block";
  std::vector<int> levels;
  double tol = 1e-4;
  int N_max = 50;
  std::string measure, rule, solver;
  std::string train_preset = "train", train_file;
  std::optional<double> c_delta, C_delta, constant_eps;
  double trunc_tol = 1e-8;
  std::optional<double> bulk;
  bool raw = false;
  bool keep_snapshots = false;
  std::string out_dir = "awrb_out";
  std::string model_name = "model.awrb";
  bool quiet = false;
};

int run_train(const TrainArgs& a, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  ProblemSpec spec = load_problem(a.problem, a.levels);
  GreedyConfig cfg = default_greedy_config(spec, a.tol);
  cfg.N_max = a.N_max;
  cfg.train = grid_of(spec, a.train_preset, a.train_file);
  check_dims(spec, cfg.train);
  if (!a.measure.empty()) cfg.measure = measure_from_string(a.measure);
  if (!a.rule.empty()) cfg.rule = rule_from_string(a.rule);
  if (!a.solver.empty()) cfg.solver = solver_from_string(a.solver);
  cfg.c_delta = a.c_delta;
  cfg.C_delta = a.C_delta;
  cfg.constant_eps = a.constant_eps;
  cfg.trunc_tol = a.trunc_tol;
  if (a.bulk) cfg.awgm.c = *a.bulk;
  cfg.orthonormalize = !a.raw;
  cfg.keep_snapshots = a.keep_snapshots;
  cfg.threads = threads;
  if (!a.quiet) cfg.log = [](const std::string& s) { std::cerr << s << std::endl; };

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  ProblemInstance P(spec);

  GreedyTrace trace;
  ReducedModel model;
  bool failed = false;
  std::string failure;
  try {
    std::tie(model, trace) = train(P, cfg);
  } catch (const TrainingError& e) {
    trace = e.partial;
    failed = true;
    failure = e.what();
  }
  write_file(dir / "trace.csv", trace_csv(trace));
  write_file(dir / "trace.json", nlohmann::json(trace).dump(1));
  if (!failed) save_model(model, (dir / a.model_name).string());

  nlohmann::json run = {
      {"problem", spec.name},
      {"levels", spec.levels},
      {"tol", cfg.tol},
      {"N_max", cfg.N_max},
      {"measure", to_string(cfg.measure)},
      {"rule", to_string(cfg.rule)},
      {"solver", to_string(cfg.solver)},
      {"train_points", cfg.train.size()},
      {"trunc_tol", cfg.trunc_tol},
      {"bulk", cfg.awgm.c},
      {"orthonormalize", cfg.orthonormalize},
      {"threads", threads},
      {"N", failed ? trace.records.size() : model.N()},
      {"converged", trace.converged && !failed},
      {"stop_reason", trace.stop_reason},
      {"final_max_estimator", trace.final_max},
      {"c_delta", trace.final_c_delta},
      {"C_delta", trace.final_C_delta},
      {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
      {"model", failed ? "" : (dir / a.model_name).string()}};
  if (cfg.constant_eps) run["constant_eps"] = *cfg.constant_eps;
  if (failed) run["error"] = failure;
  write_file(dir / "run.json", run.dump(1));

  std::cout << "N=" << run["N"] << " stop: " << trace.stop_reason << " max estimator " << fmt(trace.final_max)
            << " (" << a.out_dir << ")\n";
  if (failed) {
    std::cerr << "error: " << failure << "\n";
    return kError;
  }
  return trace.converged ? kOk : kUnconverged;
}

// --- evaluate / sweep ---------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::vector<std::string> points;
  std::string preset, grid_file, solver, out;
  bool strict = false;
  bool all_prefixes = false;
};

std::ostream& output(const std::string& path, std::ofstream& f) {
  if (path.empty() || path == "-") return std::cout;
  f.open(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

int run_evaluate(const EvalArgs& a, int threads) {
  (void)threads;
  const ReducedModel m = load_model(a.model);
  std::vector<ParameterPoint> grid;
  for (auto& s : a.points) grid.push_back(parse_point(s));
  if (!a.preset.empty() || !a.grid_file.empty()) {
    auto g = grid_of(m.spec, a.preset, a.grid_file);
    grid.insert(grid.end(), g.begin(), g.end());
  }
  if (grid.empty()) throw std::invalid_argument("no parameter points (use --mu, --preset or --grid)");
  check_dims(m.spec, grid);
  std::optional<RbSolver> solver;
  if (!a.solver.empty()) solver = solver_from_string(a.solver);

  std::ofstream f;
  std::ostream& os = output(a.out, f);
  for (std::size_t i = 0; i < m.spec.box.dim(); ++i) os << "mu" << i + 1 << ',';
  for (std::size_t i = 0; i < m.N(); ++i) os << 'u' << i + 1 << ',';
  os << "estimator,seconds\n";
  for (auto& mu : grid) {
    if (a.strict) m.theta_b(mu, DomainPolicy::Error);
    const auto t0 = std::chrono::steady_clock::now();
    const auto sol = reduced_solve(m, mu, solver);
    const double est = estimate(m, mu, sol.u);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (double v : mu) os << fmt(v) << ',';
    for (double v : sol.u) os << fmt(v) << ',';
    os << fmt(est) << ',' << fmt(sec) << '\n';
  }
  return kOk;
}

int run_sweep(const EvalArgs& a, int threads) {
  const ReducedModel m = load_model(a.model);
  const auto grid = grid_of(m.spec, a.preset.empty() ? "test" : a.preset, a.grid_file);
  check_dims(m.spec, grid);
  const auto r = evaluate_testset(m, grid, threads, a.all_prefixes);
  std::ofstream f;
  output(a.out, f) << testset_csv(r);
  const auto& fin = r.final();
  std::cerr << "N=" << fin.N << " max estimator " << fmt(fin.max) << " over " << grid.size() << " points in "
            << fmt(fin.seconds) << " s\n";
  return kOk;
}

// --- inspect ------------------------------------------------------------------

int run_inspect(const std::string& path, const std::string& out) {
  const ReducedModel m = load_model(path);
  std::cerr << "problem " << m.spec.name << ", solver " << to_string(m.solver) << ", N=" << m.N() << ", tol "
            << fmt(m.tol) << ", " << (m.converged ? "converged" : "not converged") << "\n";
  for (std::size_t i = 0; i < m.N(); ++i) {
    std::cerr << "  " << i + 1 << ": mu=(";
    for (std::size_t k = 0; k < m.samples[i].size(); ++k) std::cerr << (k ? ", " : "") << fmt(m.samples[i][k]);
    std::cerr << ") eps " << fmt(m.eps[i]);
    if (i < m.snapshots.size()) std::cerr << " support " << m.snapshots[i].size();
    std::cerr << "\n";
  }
  if (m.snapshots.empty()) {
    std::cerr << "model holds no snapshot coefficients (train with --keep-snapshots)\n";
    return kOk;
  }
  const TensorBasis& basis = m.spec.op.trial.basis;
  auto center = [](const Support& s) {
    double lo = s.parts.front().lo, hi = s.parts.front().hi;
    for (auto& p : s.parts) lo = std::min(lo, p.lo), hi = std::max(hi, p.hi);
    return 0.5 * (lo + hi);
  };
  std::ofstream f;
  std::ostream& os = output(out, f);
  os << "snapshot,x,y,abs_coef\n";
  for (std::size_t i = 0; i < m.snapshots.size(); ++i)
    for (const auto& [t, v] : m.snapshots[i]) {
      const double x = center(basis.b[0].support(t[0]));
      const double y = basis.dim == 2 ? center(basis.b[1].support(t[1])) : 0.0;
      os << i + 1 << ',' << fmt(x) << ',' << fmt(y) << ',' << fmt(std::abs(v)) << '\n';
    }
  return kOk;
}

// --- selftest -----------------------------------------------------------------

int run_selftest_cmd(const std::vector<std::string>& suites, std::uint64_t seed) {
  SelftestOptions opt;
  opt.seed = seed;
  opt.suites = suites;
  opt.on_check = [](const SelftestCheck& c) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.suite << '/' << c.name << "  value " << fmt(c.value) << " tol "
              << fmt(c.tolerance) << (c.detail.empty() ? "" : "  " + c.detail) << std::endl;
  };
  const auto rep = run_selftest(opt);
  std::size_t failed = 0;
  for (auto& c : rep.checks) failed += !c.passed;
  std::cout << rep.checks.size() - failed << '/' << rep.checks.size() << " checks passed in " << fmt(rep.seconds)
            << " s\n";
  return rep.passed() ? kOk : kSelftestFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive wavelet reduced basis toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = env_threads();
  app.add_option("--threads", threads, "Worker threads for parameter sweeps (default: AWRB_THREADS or 1)")
      ->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Run the weak greedy and write a model");
  train_cmd->add_option("--problem,-p", ta.problem, "thermal-block, cdr, poisson-1d, toy-1d or a problem JSON file");
  train_cmd->add_option("--levels,-L", ta.levels, "Maximal level per direction")->expected(1, 2);
  train_cmd->add_option("--tol,-t", ta.tol, "Greedy target tolerance")->check(CLI::PositiveNumber);
  train_cmd->add_option("--nmax", ta.N_max, "Maximal basis size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--measure", ta.measure, "Error measure for snapshot solves");
  train_cmd->add_option("--rule", ta.rule, "Snapshot tolerance rule");
  train_cmd->add_option("--solver", ta.solver, "Galerkin, PetrovSupremizer or NormalEq");
  train_cmd->add_option("--train-preset", ta.train_preset, "Training grid preset");
  train_cmd->add_option("--train-grid", ta.train_file, "Training grid CSV (one point per line)");
  train_cmd->add_option("--c-delta", ta.c_delta, "Override the lower surrogate constant");
  train_cmd->add_option("--C-delta", ta.C_delta, "Override the upper surrogate constant");
  train_cmd->add_option("--constant-eps", ta.constant_eps, "Use one snapshot tolerance for all parameters");
  train_cmd->add_option("--trunc-tol", ta.trunc_tol, "Gramian truncation tolerance");
  train_cmd->add_option("--bulk", ta.bulk, "Bulk fraction of the adaptive solver")->check(CLI::Range(0.0, 1.0));
  train_cmd->add_flag("--raw", ta.raw, "Keep raw snapshots instead of an orthonormal basis");
  train_cmd->add_flag("--keep-snapshots", ta.keep_snapshots, "Store snapshot coefficients in the model");
  train_cmd->add_option("--out,-o", ta.out_dir, "Output directory");
  train_cmd->add_option("--model-name", ta.model_name, "Model file name inside the output directory");
  train_cmd->add_flag("--quiet,-q", ta.quiet, "No progress log");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Reduced solutions and estimates at given parameters");
  eval_cmd->add_option("--model,-m", ea.model, "Model file")->required();
  eval_cmd->add_option("--mu", ea.points, "Parameter point 'a,b' (repeatable)");
  eval_cmd->add_option("--preset", ea.preset, "Grid preset of the model's problem");
  eval_cmd->add_option("--grid", ea.grid_file, "Grid CSV");
  eval_cmd->add_option("--solver", ea.solver, "Override the online solver");
  eval_cmd->add_flag("--strict", ea.strict, "Reject parameters outside the parameter box");
  eval_cmd->add_option("--out,-o", ea.out, "Output CSV (default stdout)");

  EvalArgs sa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Estimator statistics over a test grid");
  sweep_cmd->add_option("--model,-m", sa.model, "Model file")->required();
  sweep_cmd->add_option("--preset", sa.preset, "Grid preset (default test)");
  sweep_cmd->add_option("--grid", sa.grid_file, "Grid CSV");
  sweep_cmd->add_flag("--all-prefixes", sa.all_prefixes, "One row per basis size 0..N");
  sweep_cmd->add_option("--out,-o", sa.out, "Output CSV (default stdout)");

  std::string inspect_model, inspect_out;
  auto* inspect_cmd = app.add_subcommand("inspect", "Model summary and snapshot coefficient CSV");
  inspect_cmd->add_option("model", inspect_model, "Model file")->required();
  inspect_cmd->add_option("--out,-o", inspect_out, "Snapshot CSV (default stdout)");

  std::vector<std::string> suites;
  std::uint64_t seed = 7;
  auto* selftest_cmd = app.add_subcommand("selftest", "Invariant checks against dense oracles");
  selftest_cmd->add_option("--suite", suites, "wavelet, multitree, affine, offline-online (repeatable)");
  selftest_cmd->add_option("--seed", seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return run_train(ta, threads);
    if (*eval_cmd) return run_evaluate(ea, threads);
    if (*sweep_cmd) return run_sweep(sa, threads);
    if (*inspect_cmd) return run_inspect(inspect_model, inspect_out);
    if (*selftest_cmd) return run_selftest_cmd(suites, seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kUsage;
}
