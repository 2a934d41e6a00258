#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "awrb/wavelet.hpp"

namespace awrb {

// A tensor-product wavelet index.  One- and two-dimensional problems share
// the type; for dim = 1 the second component is unused and held at its
// default value so that ordering and equality stay well defined.
struct TensorIndex {
  int dim = 2;
  std::array<WaveletIndex1D, 2> c{};

  TensorIndex() = default;
  explicit TensorIndex(WaveletIndex1D a) : dim(1), c{a, WaveletIndex1D{}} {}
  TensorIndex(WaveletIndex1D a, WaveletIndex1D b) : dim(2), c{a, b} {}

  const WaveletIndex1D& operator[](int i) const { return c[i]; }
  WaveletIndex1D& operator[](int i) { return c[i]; }
  int total_level() const { return dim == 1 ? c[0].j : c[0].j + c[1].j; }

  auto operator<=>(const TensorIndex&) const = default;
};

// Univariate bases for each direction of a tensor problem.
struct TensorBasis {
  int dim = 2;
  std::array<UnivariateBasis, 2> b{};

  TensorBasis() = default;
  explicit TensorBasis(UnivariateBasis x) : dim(1), b{std::move(x), UnivariateBasis{}} {}
  TensorBasis(UnivariateBasis x, UnivariateBasis y) : dim(2), b{std::move(x), std::move(y)} {}

  bool valid(const TensorIndex& t) const;
};

// Ordered finite set of tensor indices (sorted, unique).
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::vector<TensorIndex> v);  // sorts and deduplicates

  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }
  bool contains(const TensorIndex& t) const;
  bool insert(const TensorIndex& t);  // true if newly inserted
  const std::vector<TensorIndex>& items() const { return v_; }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  bool subset_of(const IndexSet& o) const;
  friend IndexSet set_union(const IndexSet& a, const IndexSet& b);
  friend IndexSet set_intersection(const IndexSet& a, const IndexSet& b);
  bool operator==(const IndexSet&) const = default;

 private:
  std::vector<TensorIndex> v_;
};

IndexSet set_union(const IndexSet& a, const IndexSet& b);
IndexSet set_intersection(const IndexSet& a, const IndexSet& b);

// Sparse coefficient vector over tensor indices, sorted by index.
class CoeffVector {
 public:
  using Entry = std::pair<TensorIndex, double>;

  CoeffVector() = default;
  explicit CoeffVector(std::vector<Entry> e);  // sorts; duplicate indices are summed

  std::size_t size() const { return e_.size(); }
  bool empty() const { return e_.empty(); }
  double get(const TensorIndex& t) const;
  void set(const TensorIndex& t, double v);
  void add(const TensorIndex& t, double v);
  const std::vector<Entry>& entries() const { return e_; }
  auto begin() const { return e_.begin(); }
  auto end() const { return e_.end(); }

  double norm() const;
  double dot(const CoeffVector& o) const;
  IndexSet support() const;
  CoeffVector restricted(const IndexSet& s) const;
  // Drops stored exact zeros.
  void compact();
  void axpy(double a, const CoeffVector& x);  // this += a x
  void scale(double a);

 private:
  std::vector<Entry> e_;
};

void to_json(nlohmann::json& j, const TensorIndex& t);
void from_json(const nlohmann::json& j, TensorIndex& t);
void to_json(nlohmann::json& j, const CoeffVector& v);
void from_json(const nlohmann::json& j, CoeffVector& v);

// Tree check of a univariate index list: every level-j (j > 0) member has
// its support covered by the supports of the level-(j-1) members.
bool is_tree(const std::vector<WaveletIndex1D>& set, const UnivariateBasis& basis);

// Every one-dimensional slice is a tree (or empty).
bool is_multitree(const IndexSet& set, const TensorBasis& basis);

// Closure under the support-overlap parent relation, applied slice-wise.
// The result is a multitree, the operation is extensive, monotone and
// idempotent, and closed inputs are returned unchanged.
IndexSet multitree_completion(const IndexSet& set, const TensorBasis& basis);

// The N largest entries in modulus; ties are broken by index order.
CoeffVector best_n_term(const CoeffVector& v, std::size_t N);

struct RateEstimate {
  double s = 0.0;
  bool super_algebraic = false;  // tail collapses faster than any fitted power (e.g. finite support)
};

// Least-squares slope of log ||v - v_N|| against log N over dyadic N.
// Requires at least 16 nonzero entries; equal magnitudes throughout give an
// undefined rate (std::domain_error).
RateEstimate approx_rate_estimate(const CoeffVector& v);

}  // namespace awrb
