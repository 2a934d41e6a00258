#pragma once

#include <array>
#include <cstddef>
#include <mutex>
#include <vector>

#include "awrb/operator.hpp"

namespace awrb {

// The full tensor box of all indices with level <= L[d] in direction d.
// Dense vectors over the box use the flat position p0 * n1 + p1, where p_d
// is the level-major position of the d-th component (n1 = 1 in 1D).
struct Universe {
  TensorBasis basis;
  std::array<int, 2> L{0, 0};
  std::array<int, 2> n{1, 1};

  Universe() = default;
  Universe(TensorBasis b, std::array<int, 2> levels);

  int dim() const { return basis.dim; }
  std::size_t size() const { return static_cast<std::size_t>(n[0]) * n[1]; }
  bool contains(const TensorIndex& t) const;
  std::size_t flat(const TensorIndex& t) const;  // std::out_of_range outside the box
  TensorIndex index(std::size_t flat) const;

  std::vector<double> to_dense(const CoeffVector& v) const;
  // Entries with |x| <= drop are left out.
  CoeffVector to_sparse(const std::vector<double>& x, double drop = 0.0) const;
  // Sobolev/Riesz scaling of every box index.
  std::vector<double> scaling(const Scaling& s) const;
};

// Matrix of one univariate factor between level-L nodal hats of two bases
// (at most three entries per row).
struct NodalBand {
  int rows = 0, cols = 0;
  std::vector<int> ptr, col;
  std::vector<double> val;
  void apply(const double* x, double* y, double alpha) const;            // y += alpha M x
  void apply_transpose(const double* x, double* y, double alpha) const;  // y += alpha M^T x
};

// Synthesis (coefficients -> nodal hat values) over the whole box, or its
// transpose, direction by direction.
void transform_box(const Universe& u, const std::vector<double>& in, std::vector<double>& out, bool transpose);

NodalBand nodal_band(const Factor1D& f, const UnivariateBasis& trial, const UnivariateBasis& test, int L);

// Exact application of an affine operator on the level-capped boxes of its
// trial and test spaces, by synthesis to nodal hats, banded nodal products
// and transposed synthesis.  Cost O(box size * terms).
class GridOperator {
 public:
  // Trial and test boxes share the level caps (their nodal meshes must match).
  GridOperator(const AffineBilinearOperator& op, std::array<int, 2> levels);

  const Universe& trial() const { return trial_; }
  const Universe& test() const { return test_; }
  std::size_t components() const { return comps_.size(); }

  // y = sum_q weights[q] A_q x (weights of length components()).
  void apply(const std::vector<double>& weights, const double* x, double* y) const;
  // x = sum_q weights[q] A_q^T y.
  void apply_transpose(const std::vector<double>& weights, const double* y, double* x) const;
  std::vector<double> apply(const std::vector<double>& weights, const std::vector<double>& x) const;
  std::vector<double> apply_transpose(const std::vector<double>& weights, const std::vector<double>& y) const;

  // diag(sum_q w_q A_q); trial and test boxes must coincide.
  std::vector<double> diagonal(const std::vector<double>& weights) const;
  // diag(B^T B) for B = sum_q w_q A_q; needs a separable test scaling
  // (Product or None).
  std::vector<double> normal_diagonal(const std::vector<double>& weights) const;

 private:
  struct TermBands {
    double coeff;
    std::array<NodalBand, 2> m;
    std::array<Factor1D, 2> f;
  };
  void synth(const Universe& u, const std::vector<double>& in, std::vector<double>& out, bool transpose) const;
  void nodal_apply(const std::vector<double>& weights, const std::vector<double>& xn, std::vector<double>& yn,
                   bool transpose) const;
  // Dense univariate matrix (test positions x trial positions) of one factor.
  std::vector<double> dense_1d(int d, const Factor1D& f) const;

  Universe trial_, test_;
  std::vector<std::vector<TermBands>> comps_;
  struct Group {
    std::vector<std::pair<std::size_t, std::size_t>> members;  // (component, term)
  };
  std::vector<Group> groups_;
  std::vector<double> dtrial_, dtest_;
  // diag(B^T B) ingredients: for each pair of (component, term) entries,
  // per-direction vectors sum_lambda d(lambda)^2 A_t[lambda,nu] A_t'[lambda,nu].
  struct TermRef {
    std::size_t q, t;
  };
  void build_pairs() const;
  mutable std::once_flag pairs_once_;
  mutable std::vector<TermRef> flat_terms_;
  mutable std::vector<std::array<std::vector<double>, 2>> pair_;  // index a*T + b, a <= b
  bool separable_test_ = false;
  bool product_test_ = false;
};

// Load vector <f, psi^test> over the whole test box (scaled).
std::vector<double> grid_load(const FunctionalComponent& f, const Universe& test, const Scaling& scaling);

}  // namespace awrb
