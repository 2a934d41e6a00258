#include "awrb/operator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include "awrb/quadrature.hpp"

namespace awrb {

bool ParameterBox::contains(const ParameterPoint& mu, double tol) const {
  if (mu.size() != lo.size()) return false;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double scale = std::max(1.0, std::max(std::abs(lo[i]), std::abs(hi[i])));
    if (mu[i] < lo[i] - tol * scale || mu[i] > hi[i] + tol * scale) return false;
    if (i < integer.size() && integer[i] && std::abs(mu[i] - std::round(mu[i])) > tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Theta expressions

struct ThetaExpr::Node {
  enum class Op { Num, Mu, Delta, Add, Sub, Mul, Neg } op;
  double value = 0.0;
  int param = 0;
  std::shared_ptr<const Node> l, r;

  double eval(const ParameterPoint& mu) const {
    switch (op) {
      case Op::Num: return value;
      case Op::Mu:
        if (param < 1 || static_cast<std::size_t>(param) > mu.size())
          throw std::out_of_range("theta: parameter mu" + std::to_string(param) + " not provided");
        return mu[param - 1];
      case Op::Delta:
        if (param < 1 || static_cast<std::size_t>(param) > mu.size())
          throw std::out_of_range("theta: parameter mu" + std::to_string(param) + " not provided");
        return std::abs(mu[param - 1] - value) < 1e-9 ? 1.0 : 0.0;
      case Op::Add: return l->eval(mu) + r->eval(mu);
      case Op::Sub: return l->eval(mu) - r->eval(mu);
      case Op::Mul: return l->eval(mu) * r->eval(mu);
      case Op::Neg: return -l->eval(mu);
    }
    return 0.0;
  }
};

namespace {

class ThetaParser {
 public:
  using NodeP = std::shared_ptr<const ThetaExpr::Node>;
  using Op = ThetaExpr::Node::Op;

  explicit ThetaParser(const std::string& s) : s_(s) {}

  NodeP parse(int& max_param) {
    auto n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    max_param = max_param_;
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("theta expression '" + s_ + "': " + what + " at position " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  static NodeP make(Op op, double v = 0.0, int p = 0, NodeP l = nullptr, NodeP r = nullptr) {
    auto n = std::make_shared<ThetaExpr::Node>();
    n->op = op;
    n->value = v;
    n->param = p;
    n->l = std::move(l);
    n->r = std::move(r);
    return n;
  }
  NodeP expr() {
    auto n = term();
    for (;;) {
      if (accept('+')) n = make(Op::Add, 0, 0, n, term());
      else if (accept('-')) n = make(Op::Sub, 0, 0, n, term());
      else return n;
    }
  }
  NodeP term() {
    auto n = factor();
    while (accept('*')) n = make(Op::Mul, 0, 0, n, factor());
    return n;
  }
  double number() {
    skip();
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(s_.substr(pos_), &used);
    } catch (const std::exception&) {
      fail("expected a number");
    }
    pos_ += used;
    return v;
  }
  int mu_index() {
    skip();
    if (s_.compare(pos_, 2, "mu") != 0) fail("expected muK");
    pos_ += 2;
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("expected parameter number after 'mu'");
    int k = std::stoi(s_.substr(start, pos_ - start));
    if (k < 1) fail("parameter numbers start at 1");
    max_param_ = std::max(max_param_, k);
    return k;
  }
  NodeP factor() {
    skip();
    if (accept('(')) {
      auto n = expr();
      expect(')');
      return n;
    }
    if (accept('-')) return make(Op::Neg, 0, 0, factor());
    if (s_.compare(pos_, 5, "delta") == 0) {
      pos_ += 5;
      expect('(');
      int k = mu_index();
      expect(',');
      double v = number();
      expect(')');
      return make(Op::Delta, v, k);
    }
    if (s_.compare(pos_, 2, "mu") == 0) return make(Op::Mu, 0, mu_index());
    return make(Op::Num, number());
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int max_param_ = 0;
};

}  // namespace

ThetaExpr::ThetaExpr(std::string text) : text_(std::move(text)) {
  ThetaParser p(text_);
  root_ = p.parse(max_param_);
}

double ThetaExpr::operator()(const ParameterPoint& mu) const { return root_->eval(mu); }

std::vector<double> evaluate_thetas(const std::vector<ThetaExpr>& thetas, const ParameterPoint& mu,
                                    const ParameterBox& box, DomainPolicy policy) {
  if (policy != DomainPolicy::Ignore && !box.contains(mu)) {
    std::string where = "(";
    for (std::size_t i = 0; i < mu.size(); ++i) where += (i ? ", " : "") + std::to_string(mu[i]);
    where += ")";
    if (policy == DomainPolicy::Error) throw std::domain_error("parameter " + where + " outside the parameter box");
    std::cerr << "warning: parameter " << where << " outside the parameter box\n";
  }
  std::vector<double> out;
  out.reserve(thetas.size());
  for (auto& t : thetas) out.push_back(t(mu));
  return out;
}

// ---------------------------------------------------------------------------

Func1D Func1D::indicator(double a, double b) {
  Func1D f;
  f.type = Type::Indicator;
  f.a = a;
  f.b = b;
  return f;
}

Func1D Func1D::cosine(double freq) {
  Func1D f;
  f.type = Type::Cosine;
  f.freq = freq;
  return f;
}

Func1D Func1D::constant(double c) {
  Func1D f;
  f.type = Type::Polynomial;
  f.poly = {c};
  return f;
}

double Scaling::operator()(const TensorBasis& basis, const TensorIndex& t) const {
  switch (type) {
    case Type::None: return 1.0;
    case Type::Product: {
      double s = 1.0;
      for (int d = 0; d < basis.dim; ++d) s *= basis.b[d].sobolev_factor(t.c[d].j);
      return s;
    }
    case Type::H1Sum: {
      double s = 0.0;
      for (int d = 0; d < basis.dim; ++d) s += std::ldexp(1.0, 2 * t.c[d].j);
      return 1.0 / std::sqrt(s);
    }
    case Type::SpaceTimeX: {
      if (basis.dim != 2) throw std::invalid_argument("space-time scaling needs two directions");
      const int jt = t.c[time_dir].j, jx = t.c[1 - time_dir].j;
      return 1.0 / std::sqrt(std::ldexp(1.0, 2 * jx) + std::ldexp(1.0, 2 * (jt - jx)));
    }
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Univariate integration

PiecewiseLinear function_on_unit(const UnivariateBasis& basis, const WaveletIndex1D& idx) {
  PiecewiseLinear f = basis.function(idx);
  if (!basis.periodic()) return f;
  for (auto& p : f.pieces) {
    if (p.b <= 1e-15) {
      p.a += 1.0;
      p.b += 1.0;
    } else if (p.a >= 1.0 - 1e-15) {
      p.a -= 1.0;
      p.b -= 1.0;
    }
  }
  std::sort(f.pieces.begin(), f.pieces.end(), [](const Piece& x, const Piece& y) { return x.a < y.a; });
  return f;
}

namespace {

inline double piece_d(const Piece& p, int d, double x) { return d == 0 ? p.value(x) : (d == 1 ? p.slope() : 0.0); }

}  // namespace

double integrate_factor(const Factor1D& f, const PiecewiseLinear& phi, const PiecewiseLinear& psi) {
  if (f.dtrial > 1 || f.dtest > 1) throw std::invalid_argument("integrate_factor: derivative order above 1");
  const auto& q = gauss_legendre(2);
  double s = 0.0;
  std::size_t i = 0, k = 0;
  const auto& P = phi.pieces;
  const auto& Q = psi.pieces;
  while (i < P.size() && k < Q.size()) {
    const double lo = std::max({P[i].a, Q[k].a, f.a});
    const double hi = std::min({P[i].b, Q[k].b, f.b});
    if (hi > lo) {
      const double L = hi - lo;
      for (std::size_t g = 0; g < q.x.size(); ++g) {
        const double x = lo + L * q.x[g];
        s += L * q.w[g] * (f.w0 + f.w1 * x) * piece_d(P[i], f.dtrial, x) * piece_d(Q[k], f.dtest, x);
      }
    }
    if (P[i].b < Q[k].b) ++i;
    else ++k;
  }
  return s;
}

double integrate_load(const Func1D& f, const PiecewiseLinear& psi) {
  double s = 0.0;
  for (auto& p : psi.pieces) {
    switch (f.type) {
      case Func1D::Type::Indicator: {
        const double lo = std::max(p.a, f.a), hi = std::min(p.b, f.b);
        if (hi > lo) s += 0.5 * (hi - lo) * (p.value(lo) + p.value(hi));
        break;
      }
      case Func1D::Type::Cosine: {
        const double w = 2.0 * std::numbers::pi * f.freq;
        const double beta = p.slope(), alpha = p.va - beta * p.a;
        auto F = [&](double x) { return (alpha + beta * x) * std::sin(w * x) / w + beta * std::cos(w * x) / (w * w); };
        s += F(p.b) - F(p.a);
        break;
      }
      case Func1D::Type::Polynomial: {
        const int deg = static_cast<int>(f.poly.size()) - 1;
        const auto& q = gauss_legendre(std::max(1, (deg + 1) / 2 + 1));
        const double L = p.b - p.a;
        for (std::size_t g = 0; g < q.x.size(); ++g) {
          const double x = p.a + L * q.x[g];
          double pv = 0.0;
          for (int c = deg; c >= 0; --c) pv = pv * x + f.poly[c];
          s += L * q.w[g] * pv * p.value(x);
        }
        break;
      }
    }
  }
  return s;
}

double entry(const OperatorComponent& comp, const Space& trial, const Space& test, const TensorIndex& row,
             const TensorIndex& col) {
  const int dim = trial.basis.dim;
  if (!trial.basis.valid(col) || !test.basis.valid(row)) throw std::out_of_range("entry: invalid index");
  std::array<PiecewiseLinear, 2> phi, psi;
  for (int d = 0; d < dim; ++d) {
    phi[d] = function_on_unit(trial.basis.b[d], col.c[d]);
    psi[d] = function_on_unit(test.basis.b[d], row.c[d]);
  }
  double s = 0.0;
  for (auto& t : comp.terms) {
    double v = t.coeff;
    for (int d = 0; d < dim && v != 0.0; ++d) v *= integrate_factor(t.f[d], phi[d], psi[d]);
    s += v;
  }
  return s * trial.scaling(trial.basis, col) * test.scaling(test.basis, row);
}

// ---------------------------------------------------------------------------
// Restricted application

namespace {

// Conservative translation window of level-l functions whose support can
// meet [lo, hi] (unwrapped, inside [0,1]).
std::pair<int, int> k_window(const UnivariateBasis& B, int l, double lo, double hi) {
  if (l == 0) return {0, B.count(0) - 1};
  if (B.spec().family == Family::BiorthoBSpline) {
    const double H = 2.0 * B.mesh(l);  // spacing of wavelet centres
    return {std::max(0, static_cast<int>(std::floor(lo / H)) - 2), std::min(B.count(l) - 1, static_cast<int>(std::ceil(hi / H)) + 1)};
  }
  const double w = std::ldexp(1.0, -(l - 1));
  const int m0 = static_cast<int>(std::floor(lo / w)) - 1, m1 = static_cast<int>(std::ceil(hi / w));
  return {std::max(0, 2 * m0), std::min(B.count(l) - 1, 2 * m1 + 1)};
}

struct FnCache {
  const UnivariateBasis* B;
  std::map<WaveletIndex1D, PiecewiseLinear> m;
  const PiecewiseLinear& get(const WaveletIndex1D& i) {
    auto it = m.find(i);
    if (it == m.end()) it = m.emplace(i, function_on_unit(*B, i)).first;
    return it->second;
  }
};

// Candidate partners of `idx` (in basis A) among members of `levels` (basis B).
template <class F>
void for_each_overlapping(const UnivariateBasis& A, const WaveletIndex1D& idx, const UnivariateBasis& Bb,
                          const std::map<int, std::vector<int>>& levels, F&& fn) {
  const Support s = A.support(idx);
  std::vector<int> cand;
  for (auto& [l, ks] : levels) {
    cand.clear();
    auto add_range = [&](int k0, int k1) {
      for (auto it = std::lower_bound(ks.begin(), ks.end(), k0); it != ks.end() && *it <= k1; ++it) cand.push_back(*it);
    };
    for (auto& part : s.parts) {
      auto [k0, k1] = k_window(Bb, l, part.lo, part.hi);
      add_range(k0, k1);
    }
    if (Bb.periodic() && l >= 1) {
      // partners whose unwrapped support crosses 0 or 1 sit at either end
      add_range(0, 1);
      add_range(Bb.count(l) - 2, Bb.count(l) - 1);
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (int k : cand) fn(WaveletIndex1D{l, k, l == 0 ? Kind::Scaling : Kind::Wavelet});
  }
}

std::map<int, std::vector<int>> by_level(const std::vector<WaveletIndex1D>& v) {
  std::map<int, std::vector<int>> m;
  for (auto& i : v) m[i.j].push_back(i.k);
  for (auto& [l, ks] : m) {
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  }
  return m;
}

}  // namespace

CoeffVector apply_restricted(const OperatorComponent& comp, const Space& trial, const Space& test, const IndexSet& rows,
                             const IndexSet& cols, const CoeffVector& v, ApplyCounters* counters) {
  if (!is_multitree(rows, test.basis)) throw std::invalid_argument("apply_restricted: rows are not a multitree");
  if (!is_multitree(cols, trial.basis)) throw std::invalid_argument("apply_restricted: cols are not a multitree");
  for (auto& [t, x] : v)
    if (!cols.contains(t)) throw std::invalid_argument("apply_restricted: vector support outside cols");
  ApplyCounters local;
  ApplyCounters& cnt = counters ? *counters : local;
  const int dim = trial.basis.dim;

  std::vector<FnCache> trialF, testF;
  for (int d = 0; d < dim; ++d) {
    trialF.push_back({&trial.basis.b[d], {}});
    testF.push_back({&test.basis.b[d], {}});
  }

  // Scaled input.
  std::vector<std::pair<TensorIndex, double>> in;
  for (auto& [t, x] : v)
    if (x != 0.0) in.push_back({t, x * trial.scaling(trial.basis, t)});

  std::map<TensorIndex, double> out;
  for (const Term& term : comp.terms) {
    if (dim == 1) {
      std::vector<WaveletIndex1D> rlist;
      for (auto& t : rows) rlist.push_back(t.c[0]);
      auto rl = by_level(rlist);
      for (auto& [t, x] : in) {
        const auto& phi = trialF[0].get(t.c[0]);
        for_each_overlapping(trial.basis.b[0], t.c[0], test.basis.b[0], rl, [&](const WaveletIndex1D& r) {
          ++cnt.entries_1d;
          double e = integrate_factor(term.f[0], phi, testF[0].get(r));
          if (e != 0.0) {
            out[TensorIndex(r)] += term.coeff * e * x;
            ++cnt.flops;
          }
        });
      }
      continue;
    }
    // Stage 1: z(nu0, lam1) = sum_nu1 A1(lam1, nu1) v(nu0, nu1), lam1 over second components of rows.
    std::vector<WaveletIndex1D> r1;
    for (auto& t : rows) r1.push_back(t.c[1]);
    auto r1l = by_level(r1);
    std::map<WaveletIndex1D, std::map<WaveletIndex1D, double>> z;  // lam1 -> nu0 -> value
    for (auto& [t, x] : in) {
      const auto& phi = trialF[1].get(t.c[1]);
      for_each_overlapping(trial.basis.b[1], t.c[1], test.basis.b[1], r1l, [&](const WaveletIndex1D& lam1) {
        ++cnt.entries_1d;
        double e = integrate_factor(term.f[1], phi, testF[1].get(lam1));
        if (e != 0.0) {
          z[lam1][t.c[0]] += e * x;
          ++cnt.flops;
        }
      });
    }
    // Stage 2: y(lam0, lam1) = sum_nu0 A0(lam0, nu0) z(nu0, lam1) for rows.
    std::map<WaveletIndex1D, std::map<int, std::vector<int>>> zl;
    for (auto& [lam1, m] : z) {
      std::vector<WaveletIndex1D> keys;
      for (auto& [nu0, val] : m) keys.push_back(nu0);
      zl[lam1] = by_level(keys);
    }
    for (auto& row : rows) {
      auto it = z.find(row.c[1]);
      if (it == z.end()) continue;
      const auto& psi = testF[0].get(row.c[0]);
      double acc = 0.0;
      for_each_overlapping(test.basis.b[0], row.c[0], trial.basis.b[0], zl[row.c[1]], [&](const WaveletIndex1D& nu0) {
        ++cnt.entries_1d;
        double e = integrate_factor(term.f[0], trialF[0].get(nu0), psi);
        if (e != 0.0) {
          acc += e * it->second.at(nu0);
          ++cnt.flops;
        }
      });
      if (acc != 0.0) out[row] += term.coeff * acc;
    }
  }
  std::vector<CoeffVector::Entry> e;
  for (auto& [t, x] : out)
    if (x != 0.0) e.push_back({t, x * test.scaling(test.basis, t)});
  return CoeffVector(std::move(e));
}

CoeffVector assemble_rhs(const FunctionalComponent& f, const Space& test, const IndexSet& rows) {
  std::vector<CoeffVector::Entry> e;
  const int dim = test.basis.dim;
  for (auto& row : rows) {
    std::array<PiecewiseLinear, 2> psi;
    for (int d = 0; d < dim; ++d) psi[d] = function_on_unit(test.basis.b[d], row.c[d]);
    double s = 0.0;
    for (auto& t : f.terms) {
      double v = t.coeff;
      for (int d = 0; d < dim && v != 0.0; ++d) v *= integrate_load(t.f[d], psi[d]);
      s += v;
    }
    if (s != 0.0) e.push_back({row, s * test.scaling(test.basis, row)});
  }
  return CoeffVector(std::move(e));
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const Factor1D& f) {
  j = {{"dtrial", f.dtrial}, {"dtest", f.dtest}, {"w0", f.w0}, {"w1", f.w1}, {"a", f.a}, {"b", f.b}};
}

void from_json(const nlohmann::json& j, Factor1D& f) {
  f = Factor1D{};
  f.dtrial = j.value("dtrial", 0);
  f.dtest = j.value("dtest", 0);
  f.w0 = j.value("w0", 1.0);
  f.w1 = j.value("w1", 0.0);
  f.a = j.value("a", 0.0);
  f.b = j.value("b", 1.0);
}

void to_json(nlohmann::json& j, const Func1D& f) {
  switch (f.type) {
    case Func1D::Type::Indicator: j = {{"type", "indicator"}, {"a", f.a}, {"b", f.b}}; break;
    case Func1D::Type::Cosine: j = {{"type", "cosine"}, {"freq", f.freq}}; break;
    case Func1D::Type::Polynomial: j = {{"type", "polynomial"}, {"coeffs", f.poly}}; break;
  }
}

void from_json(const nlohmann::json& j, Func1D& f) {
  const auto t = j.at("type").get<std::string>();
  if (t == "indicator") f = Func1D::indicator(j.at("a").get<double>(), j.at("b").get<double>());
  else if (t == "cosine") f = Func1D::cosine(j.value("freq", 1.0));
  else if (t == "polynomial") {
    f = Func1D{};
    f.poly = j.at("coeffs").get<std::vector<double>>();
  } else throw std::invalid_argument("unknown load factor type: " + t);
}

void to_json(nlohmann::json& j, const Scaling& s) {
  static const char* names[] = {"product", "h1sum", "spacetime_x", "none"};
  j = {{"type", names[static_cast<int>(s.type)]}, {"time_dir", s.time_dir}};
}

void from_json(const nlohmann::json& j, Scaling& s) {
  const auto t = j.at("type").get<std::string>();
  if (t == "product") s.type = Scaling::Type::Product;
  else if (t == "h1sum") s.type = Scaling::Type::H1Sum;
  else if (t == "spacetime_x") s.type = Scaling::Type::SpaceTimeX;
  else if (t == "none") s.type = Scaling::Type::None;
  else throw std::invalid_argument("unknown scaling: " + t);
  s.time_dir = j.value("time_dir", 0);
}

void to_json(nlohmann::json& j, const ParameterBox& b) {
  j = {{"lo", b.lo}, {"hi", b.hi}, {"integer", b.integer}};
}

void from_json(const nlohmann::json& j, ParameterBox& b) {
  b.lo = j.at("lo").get<std::vector<double>>();
  b.hi = j.at("hi").get<std::vector<double>>();
  b.integer = j.value("integer", std::vector<bool>{});
  if (b.lo.size() != b.hi.size()) throw std::invalid_argument("parameter box: lo/hi size mismatch");
}

}  // namespace awrb
