#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "awrb/index.hpp"

namespace awrb {

// ---------------------------------------------------------------------------
// Parameters

using ParameterPoint = std::vector<double>;

struct ParameterBox {
  std::vector<double> lo, hi;
  std::vector<bool> integer;  // integer-valued coordinates (optional, same length)

  std::size_t dim() const { return lo.size(); }
  bool contains(const ParameterPoint& mu, double tol = 1e-12) const;
};

enum class DomainPolicy { Error, Warn, Ignore };

// ---------------------------------------------------------------------------
// Theta expressions:  expr := term (('+'|'-') term)*,  term := factor ('*' factor)*,
// factor := number | muK | delta(muK, number) | '(' expr ')' | '-' factor.
// Parameter indices K are 1-based.

class ThetaExpr {
 public:
  ThetaExpr() : ThetaExpr("1") {}
  explicit ThetaExpr(std::string text);
  double operator()(const ParameterPoint& mu) const;
  const std::string& text() const { return text_; }
  int max_parameter() const { return max_param_; }  // largest K referenced, 0 if none

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
  int max_param_ = 0;
};

// ---------------------------------------------------------------------------
// Separable forms

// Univariate factor:  int_a^b (w0 + w1 x) d^{dtrial} phi  d^{dtest} psi dx.
struct Factor1D {
  int dtrial = 0;
  int dtest = 0;
  double w0 = 1.0, w1 = 0.0;
  double a = 0.0, b = 1.0;
  bool operator==(const Factor1D&) const = default;
};

struct Term {
  double coeff = 1.0;
  std::array<Factor1D, 2> f{};
  bool operator==(const Term&) const = default;
};

// A parameter-independent bilinear form, a sum of separable terms.
struct OperatorComponent {
  std::string name;
  std::vector<Term> terms;
};

// Univariate load factor.
struct Func1D {
  enum class Type { Indicator, Cosine, Polynomial };
  Type type = Type::Polynomial;
  double a = 0.0, b = 1.0;           // Indicator interval
  double freq = 1.0;                 // Cosine: cos(2 pi freq x)
  std::vector<double> poly{1.0};     // Polynomial coefficients, low degree first
  static Func1D indicator(double a, double b);
  static Func1D cosine(double freq);
  static Func1D constant(double c = 1.0);
};

struct FunctionalTerm {
  double coeff = 1.0;
  std::array<Func1D, 2> f{};
};

struct FunctionalComponent {
  std::string name;
  std::vector<FunctionalTerm> terms;
};

// Diagonal scaling of a tensor wavelet basis.
struct Scaling {
  enum class Type {
    Product,     // prod_d 2^{-s_d j_d}, s_d from the basis specs
    H1Sum,       // (4^{j_0} + 4^{j_1})^{-1/2}
    SpaceTimeX,  // (4^{j_x} + 4^{j_t - j_x})^{-1/2}, time in direction time_dir
    None
  };
  Type type = Type::Product;
  int time_dir = 0;
  double operator()(const TensorBasis& basis, const TensorIndex& t) const;
};

struct Space {
  TensorBasis basis;
  Scaling scaling;
};

struct AffineBilinearOperator {
  Space trial, test;
  std::vector<OperatorComponent> components;
  std::vector<ThetaExpr> thetas;
  std::size_t size() const { return components.size(); }
};

struct AffineFunctional {
  std::vector<FunctionalComponent> components;
  std::vector<ThetaExpr> thetas;
  std::size_t size() const { return components.size(); }
};

// Evaluates theta expressions; outside the box the policy decides between an
// exception (std::domain_error), a warning on stderr, or nothing.
std::vector<double> evaluate_thetas(const std::vector<ThetaExpr>& thetas, const ParameterPoint& mu,
                                    const ParameterBox& box, DomainPolicy policy = DomainPolicy::Error);

// ---------------------------------------------------------------------------
// Entries and restricted application

// Piecewise-linear representation on [0,1] (periodic functions wrapped).
PiecewiseLinear function_on_unit(const UnivariateBasis& basis, const WaveletIndex1D& idx);

// Exact univariate integral for one factor between trial function phi and test function psi.
double integrate_factor(const Factor1D& f, const PiecewiseLinear& phi, const PiecewiseLinear& psi);
double integrate_load(const Func1D& f, const PiecewiseLinear& psi);

// b-component(psi^trial_col, psi^test_row) including both scalings.
double entry(const OperatorComponent& comp, const Space& trial, const Space& test, const TensorIndex& row,
             const TensorIndex& col);

struct ApplyCounters {
  std::size_t entries_1d = 0;  // univariate entry evaluations
  std::size_t flops = 0;       // accumulations into intermediate or output
};

// ( _rows A_cols ) v with A one component.  Rows and cols must be
// multitrees (std::invalid_argument otherwise) and supp v within cols.
CoeffVector apply_restricted(const OperatorComponent& comp, const Space& trial, const Space& test, const IndexSet& rows,
                             const IndexSet& cols, const CoeffVector& v, ApplyCounters* counters = nullptr);

// <f, psi^test_row> for all rows (scaled test functions).
CoeffVector assemble_rhs(const FunctionalComponent& f, const Space& test, const IndexSet& rows);

// ---------------------------------------------------------------------------
// JSON (problem definitions)

void to_json(nlohmann::json& j, const Factor1D& f);
void from_json(const nlohmann::json& j, Factor1D& f);
void to_json(nlohmann::json& j, const Func1D& f);
void from_json(const nlohmann::json& j, Func1D& f);
void to_json(nlohmann::json& j, const Scaling& s);
void from_json(const nlohmann::json& j, Scaling& s);
void to_json(nlohmann::json& j, const ParameterBox& b);
void from_json(const nlohmann::json& j, ParameterBox& b);

}  // namespace awrb
