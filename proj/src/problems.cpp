#include "awrb/problems.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace awrb {

std::string to_string(RbSolver s) {
  switch (s) {
    case RbSolver::Galerkin: return "Galerkin";
    case RbSolver::PetrovSupremizer: return "PetrovSupremizer";
    case RbSolver::NormalEq: return "NormalEq";
  }
  return "?";
}

RbSolver solver_from_string(const std::string& s) {
  if (s == "Galerkin") return RbSolver::Galerkin;
  if (s == "PetrovSupremizer") return RbSolver::PetrovSupremizer;
  if (s == "NormalEq") return RbSolver::NormalEq;
  throw std::invalid_argument("unknown reduced solver: " + s);
}

std::vector<ParameterPoint> tensor_grid(const std::vector<std::vector<double>>& axes) {
  std::vector<ParameterPoint> out{{}};
  for (auto& ax : axes) {
    std::vector<ParameterPoint> next;
    for (auto& p : out)
      for (double v : ax) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    out = std::move(next);
  }
  return out;
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  if (n > 1) v.front() = lo, v.back() = hi;
  return v;
}

std::vector<double> uniform_spaced(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return v;
}

const GridPreset& ProblemSpec::preset(const std::string& n) const {
  for (auto& p : presets)
    if (p.name == n) return p;
  throw std::out_of_range("problem " + name + ": no preset named " + n);
}

// ---------------------------------------------------------------------------

namespace {

UnivariateBasisSpec bspline(Boundary b, double s) {
  UnivariateBasisSpec u;
  u.family = Family::BiorthoBSpline;
  u.d = 2;
  u.dual_d = 2;
  u.m = 2;
  u.boundary = b;
  u.s = s;
  return u;
}

Factor1D fac(int dtrial, int dtest, double a = 0.0, double b = 1.0, double w0 = 1.0, double w1 = 0.0) {
  Factor1D f;
  f.dtrial = dtrial;
  f.dtest = dtest;
  f.a = a;
  f.b = b;
  f.w0 = w0;
  f.w1 = w1;
  return f;
}

Term term(Factor1D x, Factor1D y = Factor1D{}, double c = 1.0) { return Term{c, {x, y}}; }

std::vector<ThetaExpr> thetas(std::initializer_list<const char*> t) {
  std::vector<ThetaExpr> v;
  for (auto s : t) v.emplace_back(s);
  return v;
}

}  // namespace

ProblemSpec thermal_block(std::array<int, 2> levels) {
  ProblemSpec p;
  p.name = "thermal-block";
  p.levels = levels;
  Space X;
  X.basis = TensorBasis(UnivariateBasis(bspline(Boundary::DirichletHomog, 1.0)),
                        UnivariateBasis(bspline(Boundary::Free, 1.0)));
  X.scaling.type = Scaling::Type::H1Sum;
  auto diffusion = [](double a, double b, const char* name) {
    return OperatorComponent{name, {term(fac(1, 1, a, b), fac(0, 0)), term(fac(0, 0, a, b), fac(1, 1))}};
  };
  p.op.trial = p.op.test = X;
  p.op.components = {diffusion(0.5, 1.0, "diffusion-omega0"), diffusion(0.0, 0.5, "diffusion-omega1")};
  p.op.thetas = thetas({"1", "mu1"});
  p.galerkin_op = p.op;
  p.y_gramian = p.op;
  p.y_gramian.thetas = thetas({"1", "1"});

  const double ys[] = {0.0, 0.4, 0.8, 1.0};
  for (int i = 1; i <= 9; ++i) {
    const int col = (i - 1) / 3, row = (i - 1) % 3;
    FunctionalComponent f;
    f.name = "source-" + std::to_string(i);
    f.terms.push_back({1.0, {Func1D::indicator(col / 3.0, (col + 1) / 3.0), Func1D::indicator(ys[row], ys[row + 1])}});
    p.rhs.components.push_back(f);
    p.rhs.thetas.emplace_back("delta(mu2," + std::to_string(i) + ")");
  }
  p.box = ParameterBox{{0.01, 1.0}, {100.0, 9.0}, {false, true}};
  p.experiment_box = ParameterBox{{0.01, 1.0}, {10.0, 9.0}, {false, true}};
  p.bounds.kind = StabilityBounds::Kind::ThermalBlock;
  p.measure = ErrorMeasure::DualResidual;
  p.rule = EpsilonRule::OptimalResidualRule;
  p.solver = RbSolver::Galerkin;
  const std::vector<double> sources{1, 2, 3, 4, 5, 6, 7, 8, 9};
  p.presets.push_back({"train", tensor_grid({log_spaced(0.01, 10.0, 20), sources})});
  p.presets.push_back({"test", tensor_grid({log_spaced(0.01, 20.0, 50), sources})});
  return p;
}

ProblemSpec cdr_spacetime(std::array<int, 2> levels, bool calibrate) {
  ProblemSpec p;
  p.name = "cdr";
  p.levels = levels;
  const UnivariateBasis time_x(bspline(Boundary::Periodic, 0.0)), space(bspline(Boundary::DirichletHomog, 1.0));
  Space X, Y;
  X.basis = TensorBasis(time_x, space);
  X.scaling = Scaling{Scaling::Type::SpaceTimeX, 0};
  Y.basis = TensorBasis(UnivariateBasis(bspline(Boundary::Periodic, 0.0)), space);
  Y.scaling = Scaling{Scaling::Type::Product, 0};
  p.op.trial = X;
  p.op.test = Y;
  p.op.components = {
      OperatorComponent{"time-derivative+diffusion", {term(fac(1, 0), fac(0, 0)), term(fac(0, 0), fac(1, 1))}},
      OperatorComponent{"convection", {term(fac(0, 0), fac(1, 0, 0.0, 1.0, 0.5, -1.0))}},
      OperatorComponent{"reaction", {term(fac(0, 0), fac(0, 0))}}};
  p.op.thetas = thetas({"1", "mu1", "mu2"});
  p.galerkin_op = p.op;
  p.galerkin_op.test = X;
  p.y_gramian.trial = p.y_gramian.test = Y;
  p.y_gramian.components = {OperatorComponent{"y-inner-product", {term(fac(0, 0), fac(1, 1))}}};
  p.y_gramian.thetas = thetas({"1"});
  FunctionalComponent f;
  f.name = "cos-time";
  f.terms.push_back({1.0, {Func1D::cosine(1.0), Func1D::constant(1.0)}});
  p.rhs.components = {f};
  p.rhs.thetas = thetas({"1"});
  p.box = ParameterBox{{0.0, -9.0}, {30.0, 15.0}, {}};
  p.experiment_box = p.box;
  p.bounds.kind = StabilityBounds::Kind::CdrProxy;
  p.measure = ErrorMeasure::NormalEqResidual;
  p.rule = EpsilonRule::NormalEqResidualRule;
  p.solver = RbSolver::Galerkin;
  p.presets.push_back({"train", tensor_grid({uniform_spaced(0.0, 30.0, 20), uniform_spaced(-9.0, 15.0, 20)})});
  p.presets.push_back({"test", tensor_grid({uniform_spaced(0.0, 30.0, 50), uniform_spaced(-9.0, 15.0, 50)})});
  if (calibrate) {
    const auto samples = dense_infsup(p, {3, 3}, tensor_grid({uniform_spaced(0.0, 30.0, 4), uniform_spaced(-9.0, 15.0, 5)}));
    double beta0 = INFINITY, gamma0 = 0.0;
    StabilityBounds shape = p.bounds;
    shape.beta0 = shape.gamma0 = 1.0;
    for (auto& s : samples) {
      beta0 = std::min(beta0, s.beta / shape.beta_lb(s.mu));
      gamma0 = std::max(gamma0, s.gamma / shape.gamma_ub(s.mu));
    }
    p.bounds.beta0 = beta0;
    p.bounds.gamma0 = gamma0;
  }
  return p;
}

namespace {

ProblemSpec one_d(const char* name, int L, std::vector<Term> terms) {
  ProblemSpec p;
  p.name = name;
  p.levels = {L, 0};
  Space X;
  X.basis = TensorBasis(UnivariateBasis(bspline(Boundary::DirichletHomog, 1.0)));
  X.scaling.type = Scaling::Type::Product;
  p.op.trial = p.op.test = X;
  p.op.components = {OperatorComponent{name, std::move(terms)}};
  p.op.thetas = thetas({"1"});
  p.galerkin_op = p.op;
  p.y_gramian.trial = p.y_gramian.test = X;
  p.y_gramian.components = {OperatorComponent{"h1-seminorm", {term(fac(1, 1))}}};
  p.y_gramian.thetas = thetas({"1"});
  FunctionalComponent f;
  f.name = "one";
  f.terms.push_back({1.0, {Func1D::constant(1.0), Func1D::constant(1.0)}});
  p.rhs.components = {f};
  p.rhs.thetas = thetas({"1"});
  p.bounds.kind = StabilityBounds::Kind::Constant;
  p.presets.push_back({"train", {ParameterPoint{}}});
  p.presets.push_back({"test", {ParameterPoint{}}});
  return p;
}

}  // namespace

ProblemSpec poisson_1d(int L) {
  auto p = one_d("poisson-1d", L, {term(fac(1, 1))});
  p.measure = ErrorMeasure::DualResidual;
  return p;
}

ProblemSpec toy_1d(int L) {
  auto p = one_d("toy-1d", L, {term(fac(1, 1)), term(fac(1, 0), Factor1D{}, 5.0), term(fac(0, 0))});
  p.measure = ErrorMeasure::NormalEqResidual;
  p.rule = EpsilonRule::NormalEqResidualRule;
  return p;
}

ProblemSpec make_problem(const std::string& name, std::optional<std::array<int, 2>> levels) {
  if (name == "thermal-block") return levels ? thermal_block(*levels) : thermal_block();
  if (name == "cdr") return levels ? cdr_spacetime(*levels) : cdr_spacetime();
  if (name == "poisson-1d") return poisson_1d(levels ? (*levels)[0] : 10);
  if (name == "toy-1d") return toy_1d(levels ? (*levels)[0] : 5);
  throw std::invalid_argument("unknown problem preset: " + name);
}

std::vector<InfSupSample> dense_infsup(const ProblemSpec& p, std::array<int, 2> levels,
                                       const std::vector<ParameterPoint>& mus) {
  const GridOperator B(p.op, levels), G(p.y_gramian, levels);
  std::vector<double> ones(p.y_gramian.size(), 1.0);
  const Eigen::LLT<Eigen::MatrixXd> llt(dense_operator(G, ones));
  if (llt.info() != Eigen::Success) throw std::runtime_error("dense_infsup: Y Gramian is not positive definite");
  std::vector<InfSupSample> out;
  for (auto& mu : mus) {
    const auto w = evaluate_thetas(p.op.thetas, mu, p.box, DomainPolicy::Ignore);
    const Eigen::MatrixXd Bm = dense_operator(B, w);
    const Eigen::MatrixXd Lb = llt.matrixL().solve(Bm);
    const Eigen::MatrixXd M = Lb.transpose() * Lb;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    out.push_back({mu, std::sqrt(std::max(0.0, es.eigenvalues().minCoeff())), std::sqrt(es.eigenvalues().maxCoeff())});
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json space_json(const Space& s) {
  nlohmann::json b = nlohmann::json::array();
  for (int d = 0; d < s.basis.dim; ++d) b.push_back(s.basis.b[d].spec());
  return {{"basis", b}, {"scaling", s.scaling}};
}

Space space_from(const nlohmann::json& j) {
  Space s;
  const auto& b = j.at("basis");
  if (b.size() == 1) s.basis = TensorBasis(UnivariateBasis(b[0].get<UnivariateBasisSpec>()));
  else if (b.size() == 2)
    s.basis = TensorBasis(UnivariateBasis(b[0].get<UnivariateBasisSpec>()), UnivariateBasis(b[1].get<UnivariateBasisSpec>()));
  else throw std::invalid_argument("space: one or two directions expected");
  s.scaling = j.at("scaling").get<Scaling>();
  return s;
}

std::vector<std::string> theta_texts(const std::vector<ThetaExpr>& t) {
  std::vector<std::string> out;
  for (auto& e : t) out.push_back(e.text());
  return out;
}

std::vector<ThetaExpr> theta_from(const nlohmann::json& j) {
  std::vector<ThetaExpr> out;
  for (auto& s : j) out.emplace_back(s.get<std::string>());
  return out;
}

nlohmann::json op_json(const AffineBilinearOperator& op) {
  nlohmann::json comps = nlohmann::json::array();
  for (auto& c : op.components) {
    nlohmann::json terms = nlohmann::json::array();
    for (auto& t : c.terms) terms.push_back({{"coeff", t.coeff}, {"factors", {t.f[0], t.f[1]}}});
    comps.push_back({{"name", c.name}, {"terms", terms}});
  }
  return {{"trial", space_json(op.trial)}, {"test", space_json(op.test)}, {"components", comps},
          {"thetas", theta_texts(op.thetas)}};
}

AffineBilinearOperator op_from(const nlohmann::json& j) {
  AffineBilinearOperator op;
  op.trial = space_from(j.at("trial"));
  op.test = space_from(j.at("test"));
  for (auto& c : j.at("components")) {
    OperatorComponent oc;
    oc.name = c.value("name", "");
    for (auto& t : c.at("terms")) {
      Term tt;
      tt.coeff = t.value("coeff", 1.0);
      const auto& f = t.at("factors");
      for (std::size_t d = 0; d < f.size() && d < 2; ++d) tt.f[d] = f[d].get<Factor1D>();
      oc.terms.push_back(tt);
    }
    op.components.push_back(oc);
  }
  op.thetas = theta_from(j.at("thetas"));
  if (op.thetas.size() != op.components.size()) throw std::invalid_argument("operator: theta count mismatch");
  return op;
}

}  // namespace

void to_json(nlohmann::json& j, const ProblemSpec& p) {
  nlohmann::json f = nlohmann::json::array();
  for (auto& c : p.rhs.components) {
    nlohmann::json terms = nlohmann::json::array();
    for (auto& t : c.terms) terms.push_back({{"coeff", t.coeff}, {"factors", {t.f[0], t.f[1]}}});
    f.push_back({{"name", c.name}, {"terms", terms}});
  }
  nlohmann::json presets = nlohmann::json::array();
  for (auto& g : p.presets) presets.push_back({{"name", g.name}, {"points", g.points}});
  j = {{"name", p.name},
       {"operator", op_json(p.op)},
       {"galerkin_operator", op_json(p.galerkin_op)},
       {"y_gramian", op_json(p.y_gramian)},
       {"functional", {{"components", f}, {"thetas", theta_texts(p.rhs.thetas)}}},
       {"box", p.box},
       {"experiment_box", p.experiment_box},
       {"bounds", p.bounds},
       {"measure", to_string(p.measure)},
       {"rule", to_string(p.rule)},
       {"solver", to_string(p.solver)},
       {"levels", p.levels},
       {"presets", presets}};
}

void from_json(const nlohmann::json& j, ProblemSpec& p) {
  p = ProblemSpec{};
  p.name = j.at("name").get<std::string>();
  p.op = op_from(j.at("operator"));
  p.galerkin_op = j.contains("galerkin_operator") ? op_from(j.at("galerkin_operator")) : p.op;
  p.y_gramian = op_from(j.at("y_gramian"));
  for (auto& c : j.at("functional").at("components")) {
    FunctionalComponent fc;
    fc.name = c.value("name", "");
    for (auto& t : c.at("terms")) {
      FunctionalTerm ft;
      ft.coeff = t.value("coeff", 1.0);
      const auto& f = t.at("factors");
      for (std::size_t d = 0; d < f.size() && d < 2; ++d) ft.f[d] = f[d].get<Func1D>();
      fc.terms.push_back(ft);
    }
    p.rhs.components.push_back(fc);
  }
  p.rhs.thetas = theta_from(j.at("functional").at("thetas"));
  if (p.rhs.thetas.size() != p.rhs.components.size()) throw std::invalid_argument("functional: theta count mismatch");
  p.box = j.at("box").get<ParameterBox>();
  p.experiment_box = j.contains("experiment_box") ? j.at("experiment_box").get<ParameterBox>() : p.box;
  p.bounds = j.at("bounds").get<StabilityBounds>();
  p.measure = measure_from_string(j.value("measure", "DualResidual"));
  p.rule = rule_from_string(j.value("rule", "OptimalResidualRule"));
  p.solver = solver_from_string(j.value("solver", "Galerkin"));
  p.levels = j.at("levels").get<std::array<int, 2>>();
  if (j.contains("presets"))
    for (auto& g : j.at("presets"))
      p.presets.push_back({g.at("name").get<std::string>(), g.at("points").get<std::vector<ParameterPoint>>()});
}

// ---------------------------------------------------------------------------

ProblemInstance::ProblemInstance(ProblemSpec spec, DomainPolicy policy) : spec_(std::move(spec)) {
  fine_ = std::make_unique<Discretization>(spec_.op, spec_.rhs, spec_.box, spec_.levels, policy);
  if (!fine_->square())
    galerkin_ = std::make_unique<Discretization>(spec_.galerkin_op, spec_.rhs, spec_.box, spec_.levels, policy);
  gramian_ = std::make_unique<Discretization>(spec_.y_gramian, AffineFunctional{}, ParameterBox{}, spec_.levels,
                                              DomainPolicy::Ignore);
}

RieszConstants ProblemInstance::riesz() const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!riesz_) riesz_ = riesz_constants(*gramian_);
  return *riesz_;
}

void ProblemInstance::set_riesz(RieszConstants r) {
  std::lock_guard<std::mutex> lock(mutex_);
  riesz_ = r;
}

}  // namespace awrb
