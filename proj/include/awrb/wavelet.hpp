#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace awrb {

enum class Family { BiorthoBSpline, OrthonormalMultiwavelet };
enum class Boundary { DirichletHomog, Periodic, Free };
enum class Kind : std::uint8_t { Scaling = 0, Wavelet = 1 };

std::string to_string(Family f);
std::string to_string(Boundary b);
Family family_from_string(const std::string& s);
Boundary boundary_from_string(const std::string& s);

struct UnivariateBasisSpec {
  Family family = Family::BiorthoBSpline;
  int d = 2;
  int dual_d = 2;
  int m = 2;
  Boundary boundary = Boundary::DirichletHomog;
  double s = 0.0;

  void validate() const;
  bool operator==(const UnivariateBasisSpec&) const = default;
};

void to_json(nlohmann::json& j, const UnivariateBasisSpec& s);
void from_json(const nlohmann::json& j, UnivariateBasisSpec& s);

struct WaveletIndex1D {
  int j = 0;
  int k = 0;
  Kind kind = Kind::Scaling;

  auto operator<=>(const WaveletIndex1D&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Up to two disjoint intervals in [0,1]; periodic supports may wrap.
struct Support {
  std::vector<Interval> parts;
  double length() const;
  bool contains(double x) const;
  bool intersects_interior(const Support& o) const;
};

// One linear piece on [a,b] with end values va, vb.
struct Piece {
  double a, b, va, vb;
  double value(double x) const { return va + (vb - va) * (x - a) / (b - a); }
  double slope() const { return (vb - va) / (b - a); }
};

// Piecewise linear function with sorted, non-overlapping pieces.  Periodic
// bases report pieces in unwrapped coordinates (possibly outside [0,1]).
struct PiecewiseLinear {
  std::vector<Piece> pieces;
  double lo() const { return pieces.front().a; }
  double hi() const { return pieces.back().b; }
  double value(double x) const;
  double deriv(double x) const;
};

class UnivariateBasis {
 public:
  UnivariateBasis() : UnivariateBasis(UnivariateBasisSpec{}) {}
  explicit UnivariateBasis(UnivariateBasisSpec spec);

  const UnivariateBasisSpec& spec() const { return spec_; }
  bool periodic() const { return spec_.boundary == Boundary::Periodic; }

  int count(int j) const;
  int offset(int j) const;
  int size_upto(int J) const { return offset(J + 1); }
  int position(const WaveletIndex1D& idx) const;
  WaveletIndex1D at_position(int pos) const;
  bool valid(const WaveletIndex1D& idx) const;
  void check(const WaveletIndex1D& idx) const;

  // Mesh width of the piecewise-linear representation of level-j functions.
  double mesh(int j) const;
  double sobolev_factor(int j) const;

  // L2-normalized function, without the Sobolev factor.
  PiecewiseLinear function(const WaveletIndex1D& idx) const;
  // Breakpoints of function(idx), unwrapped.
  std::vector<double> breakpoints(const WaveletIndex1D& idx) const;

  // Values include the Sobolev factor 2^{-js}.
  double eval(const WaveletIndex1D& idx, double x) const;
  double eval_deriv(const WaveletIndex1D& idx, double x) const;
  Support support(const WaveletIndex1D& idx) const;

  // Integral of x^r psi.  For periodic bases the integral is taken over the
  // unwrapped support, which is where the local polynomial exactness lives.
  double vanishing_moment(const WaveletIndex1D& idx, int r) const;

  // Level-l single-scale functions used by refinement().  B-splines: hats
  // (value 1 at their node) on mesh(l).  Multiwavelets: scaled Legendre
  // pieces, index 2*interval + component.
  int scaling_count(int l) const;
  double eval_scaling(int l, int i, double x) const;
  // Coefficients of function(idx) (L2-normalized, no Sobolev factor) in the
  // level-(j+1) single-scale functions.
  std::vector<std::pair<int, double>> refinement(const WaveletIndex1D& idx) const;

  // Level-(j-1) indices whose support meets the interior of supp(idx).
  std::vector<WaveletIndex1D> parents(const WaveletIndex1D& idx) const;
  // Level-(j+1) indices whose support meets the interior of supp(idx).
  std::vector<WaveletIndex1D> children(const WaveletIndex1D& idx) const;

  // Fast transforms between L2-normalized multiscale coefficients on levels
  // 0..L (level-major order) and nodal values of the level-L hat basis.
  // B-spline family only; the two layouts have the same length size_upto(L).
  void synthesize(int L, const double* coeffs, double* nodal) const;
  void analyze(int L, const double* nodal, double* coeffs) const;
  // Transpose of synthesize: hat pairings -> multiscale pairings.
  void synthesize_transpose(int L, const double* nodal, double* coeffs) const;
  // Batched forms: every coefficient / nodal value is a contiguous row of m
  // doubles, so one call transforms m independent vectors.
  void synthesize_rows(int L, const double* coeffs, double* nodal, int m) const;
  void analyze_rows(int L, const double* nodal, double* coeffs, int m) const;
  void synthesize_transpose_rows(int L, const double* nodal, double* coeffs, int m) const;
  // Node coordinate (in units of mesh(L)) for nodal slot i.
  int node_of_slot(int i) const;

 private:
  struct Lift {
    int node;
    double w;
  };
  std::array<Lift, 2> lifting(int j, int k) const;
  double norm(int j, int k) const;
  std::vector<std::pair<int, double>> nodal_values(const WaveletIndex1D& idx) const;  // B-spline
  int coarse_scaling_count() const;

  UnivariateBasisSpec spec_;
  // Squared L2 norms per unit mesh width: interior, left boundary, right boundary.
  double norm2_int_ = 0, norm2_left_ = 0, norm2_right_ = 0;
  std::vector<double> scaling_norm_;  // level-0
  // Multiwavelet mother functions on [0,1]: values at 0, 1/2-, 1/2+, 1.
  std::array<std::array<double, 4>, 2> mother_{};
};

// Riesz constants of the basis on levels <= J in the H^s norm given by
// spec.s (0: L2; 1: H1 seminorm for Dirichlet, full H1 norm otherwise),
// from the extreme eigenvalues of the Gramian.  With dual = true the
// constants of the dual system are returned.
std::pair<double, double> riesz_constants(const UnivariateBasisSpec& spec, int J, bool dual = false);

// Samples of the dual function of idx at the nodes of mesh(J + 6), obtained
// by cascading the analysis transform; J >= idx.j.
std::vector<double> dual_samples(const UnivariateBasis& basis, const WaveletIndex1D& idx, int J);

}  // namespace awrb
