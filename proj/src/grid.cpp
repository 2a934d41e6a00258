#include "awrb/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace awrb {

Universe::Universe(TensorBasis b, std::array<int, 2> levels) : basis(std::move(b)), L(levels) {
  if (basis.dim == 1) L[1] = 0;
  for (int d = 0; d < basis.dim; ++d) {
    if (L[d] < 0) throw std::invalid_argument("universe: negative level cap");
    n[d] = basis.b[d].size_upto(L[d]);
  }
  if (basis.dim == 1) n[1] = 1;
}

bool Universe::contains(const TensorIndex& t) const {
  if (t.dim != basis.dim || !basis.valid(t)) return false;
  for (int d = 0; d < basis.dim; ++d)
    if (t.c[d].j > L[d]) return false;
  return true;
}

std::size_t Universe::flat(const TensorIndex& t) const {
  if (!contains(t)) throw std::out_of_range("universe: index outside the level box");
  const std::size_t p0 = basis.b[0].position(t.c[0]);
  return basis.dim == 1 ? p0 : p0 * n[1] + basis.b[1].position(t.c[1]);
}

TensorIndex Universe::index(std::size_t f) const {
  if (f >= size()) throw std::out_of_range("universe: flat position out of range");
  if (basis.dim == 1) return TensorIndex(basis.b[0].at_position(static_cast<int>(f)));
  return TensorIndex(basis.b[0].at_position(static_cast<int>(f / n[1])), basis.b[1].at_position(static_cast<int>(f % n[1])));
}

std::vector<double> Universe::to_dense(const CoeffVector& v) const {
  std::vector<double> x(size(), 0.0);
  for (auto& [t, a] : v) x[flat(t)] += a;
  return x;
}

CoeffVector Universe::to_sparse(const std::vector<double>& x, double drop) const {
  std::vector<CoeffVector::Entry> e;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > drop) e.push_back({index(i), x[i]});
  return CoeffVector(std::move(e));
}

std::vector<double> Universe::scaling(const Scaling& s) const {
  std::vector<double> out(size());
  // Scalings depend on levels only; evaluate once per level pair.
  std::vector<int> lev0(n[0]), lev1(n[1], 0);
  for (int p = 0; p < n[0]; ++p) lev0[p] = basis.b[0].at_position(p).j;
  if (basis.dim == 2)
    for (int p = 0; p < n[1]; ++p) lev1[p] = basis.b[1].at_position(p).j;
  std::vector<double> table((L[0] + 1) * (L[1] + 1));
  for (int a = 0; a <= L[0]; ++a)
    for (int b = 0; b <= L[1]; ++b) {
      TensorIndex t = basis.dim == 1 ? TensorIndex(WaveletIndex1D{a, 0, a ? Kind::Wavelet : Kind::Scaling})
                                     : TensorIndex(WaveletIndex1D{a, 0, a ? Kind::Wavelet : Kind::Scaling},
                                                   WaveletIndex1D{b, 0, b ? Kind::Wavelet : Kind::Scaling});
      table[a * (L[1] + 1) + b] = s(basis, t);
    }
  for (int p0 = 0; p0 < n[0]; ++p0)
    for (int p1 = 0; p1 < n[1]; ++p1) out[static_cast<std::size_t>(p0) * n[1] + p1] = table[lev0[p0] * (L[1] + 1) + lev1[p1]];
  return out;
}

// ---------------------------------------------------------------------------

void NodalBand::apply(const double* x, double* y, double alpha) const {
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int p = ptr[r]; p < ptr[r + 1]; ++p) s += val[p] * x[col[p]];
    y[r] += alpha * s;
  }
}

void NodalBand::apply_transpose(const double* x, double* y, double alpha) const {
  for (int r = 0; r < rows; ++r) {
    const double xr = alpha * x[r];
    for (int p = ptr[r]; p < ptr[r + 1]; ++p) y[col[p]] += val[p] * xr;
  }
}

namespace {

// Level-L nodal hat of slot i (value 1 at its node), periodic pieces wrapped.
PiecewiseLinear nodal_hat(const UnivariateBasis& B, int L, int slot) {
  const int K = 1 << (L + 2);
  const double h = 1.0 / K;
  const int node = B.node_of_slot(slot);
  PiecewiseLinear f;
  if (node > 0) f.pieces.push_back({(node - 1) * h, node * h, 0.0, 1.0});
  else if (B.periodic()) f.pieces.push_back({1.0 - h, 1.0, 0.0, 1.0});
  if (node < K) f.pieces.push_back({node * h, (node + 1) * h, 1.0, 0.0});
  std::sort(f.pieces.begin(), f.pieces.end(), [](const Piece& a, const Piece& b) { return a.a < b.a; });
  return f;
}

void require_bspline(const UnivariateBasis& B) {
  if (B.spec().family != Family::BiorthoBSpline)
    throw std::invalid_argument("grid operator: only the B-spline family has a nodal synthesis");
}

void transpose_into(const double* a, double* b, int rows, int cols) {
  constexpr int T = 32;
  for (int r0 = 0; r0 < rows; r0 += T)
    for (int c0 = 0; c0 < cols; c0 += T)
      for (int r = r0; r < std::min(rows, r0 + T); ++r)
        for (int c = c0; c < std::min(cols, c0 + T); ++c)
          b[static_cast<std::size_t>(c) * rows + r] = a[static_cast<std::size_t>(r) * cols + c];
}

}  // namespace

void transform_box(const Universe& u, const std::vector<double>& in, std::vector<double>& out, bool transpose) {
  const int n0 = u.n[0], n1 = u.n[1];
  out.resize(in.size());
  auto one = [&](int d, const double* a, double* b, int m) {
    if (transpose) u.basis.b[d].synthesize_transpose_rows(u.L[d], a, b, m);
    else u.basis.b[d].synthesize_rows(u.L[d], a, b, m);
  };
  if (u.dim() == 1) {
    one(0, in.data(), out.data(), 1);
    return;
  }
  thread_local std::vector<double> t1, t2;
  t1.resize(in.size());
  t2.resize(in.size());
  one(0, in.data(), t1.data(), n1);  // direction 0: rows are contiguous blocks of n1
  transpose_into(t1.data(), t2.data(), n0, n1);
  one(1, t2.data(), t1.data(), n0);
  transpose_into(t1.data(), out.data(), n1, n0);
}

NodalBand nodal_band(const Factor1D& f, const UnivariateBasis& trial, const UnivariateBasis& test, int L) {
  require_bspline(trial);
  require_bspline(test);
  if (trial.periodic() != test.periodic()) throw std::invalid_argument("nodal_band: mixed periodic and bounded bases");
  const int K = 1 << (L + 2);
  const int nt = trial.size_upto(L), ns = test.size_upto(L);
  std::vector<int> slot_of_node(K + 1, -1);
  for (int i = 0; i < nt; ++i) slot_of_node[trial.node_of_slot(i)] = i;
  NodalBand m;
  m.rows = ns;
  m.cols = nt;
  m.ptr.push_back(0);
  for (int r = 0; r < ns; ++r) {
    const int node = test.node_of_slot(r);
    const auto psi = nodal_hat(test, L, r);
    std::vector<std::pair<int, double>> row;
    for (int dn = -1; dn <= 1; ++dn) {
      int nn = node + dn;
      if (trial.periodic()) nn = (nn + K) % K;
      if (nn < 0 || nn > K || slot_of_node[nn] < 0) continue;
      const int c = slot_of_node[nn];
      const double v = integrate_factor(f, nodal_hat(trial, L, c), psi);
      if (v != 0.0) row.push_back({c, v});
    }
    std::sort(row.begin(), row.end());
    for (auto& [c, v] : row) {
      m.col.push_back(c);
      m.val.push_back(v);
    }
    m.ptr.push_back(static_cast<int>(m.col.size()));
  }
  return m;
}

// ---------------------------------------------------------------------------

GridOperator::GridOperator(const AffineBilinearOperator& op, std::array<int, 2> levels)
    : trial_(op.trial.basis, levels), test_(op.test.basis, levels) {
  const int dim = trial_.dim();
  if (test_.dim() != dim) throw std::invalid_argument("grid operator: trial and test dimensions differ");
  if (op.components.size() != op.thetas.size() && !op.thetas.empty())
    throw std::invalid_argument("grid operator: component and theta counts differ");
  for (int d = 0; d < dim; ++d) {
    require_bspline(trial_.basis.b[d]);
    require_bspline(test_.basis.b[d]);
  }
  for (auto& c : op.components) {
    std::vector<TermBands> tb;
    for (auto& t : c.terms) {
      TermBands b;
      b.coeff = t.coeff;
      b.f = t.f;
      for (int d = 0; d < dim; ++d) b.m[d] = nodal_band(t.f[d], trial_.basis.b[d], test_.basis.b[d], trial_.L[d]);
      tb.push_back(std::move(b));
    }
    comps_.push_back(std::move(tb));
  }
  for (std::size_t q = 0; q < comps_.size(); ++q)
    for (std::size_t t = 0; t < comps_[q].size(); ++t) {
      auto it = std::find_if(groups_.begin(), groups_.end(), [&](const Group& g) {
        return dim == 1 || comps_[g.members.front().first][g.members.front().second].f[1] == comps_[q][t].f[1];
      });
      if (it == groups_.end()) groups_.push_back({{{q, t}}});
      else it->members.push_back({q, t});
    }
  dtrial_ = trial_.scaling(op.trial.scaling);
  dtest_ = test_.scaling(op.test.scaling);

  separable_test_ = op.test.scaling.type == Scaling::Type::Product || op.test.scaling.type == Scaling::Type::None;
  product_test_ = op.test.scaling.type == Scaling::Type::Product;
}

// Per-direction ingredients of diag(B^T B), built on first use (dense in
// each direction, so only meant for moderate boxes).
void GridOperator::build_pairs() const {
  const int dim = trial_.dim();
  for (std::size_t q = 0; q < comps_.size(); ++q)
    for (std::size_t t = 0; t < comps_[q].size(); ++t) flat_terms_.push_back({q, t});
  const std::size_t T = flat_terms_.size();
  pair_.assign(T * T, {});
  for (int d = 0; d < dim; ++d) {
    const int nt = trial_.n[d], ns = test_.n[d];
    std::vector<double> dd(ns, 1.0);
    if (product_test_)
      for (int p = 0; p < ns; ++p) dd[p] = test_.basis.b[d].sobolev_factor(test_.basis.b[d].at_position(p).j);
    std::vector<std::vector<double>> A(T);
    for (std::size_t a = 0; a < T; ++a) A[a] = dense_1d(d, comps_[flat_terms_[a].q][flat_terms_[a].t].f[d]);
    for (std::size_t a = 0; a < T; ++a)
      for (std::size_t b = a; b < T; ++b) {
        std::vector<double> P(nt, 0.0);
        for (int r = 0; r < ns; ++r) {
          const double w = dd[r] * dd[r];
          const double* ra = &A[a][static_cast<std::size_t>(r) * nt];
          const double* rb = &A[b][static_cast<std::size_t>(r) * nt];
          for (int c = 0; c < nt; ++c) P[c] += w * ra[c] * rb[c];
        }
        pair_[a * T + b][d] = std::move(P);
      }
  }
}

std::vector<double> GridOperator::dense_1d(int d, const Factor1D& f) const {
  const auto& Bt = trial_.basis.b[d];
  const auto& Bs = test_.basis.b[d];
  const int L = trial_.L[d], nt = trial_.n[d], ns = test_.n[d];
  const NodalBand m = nodal_band(f, Bt, Bs, L);
  std::vector<double> A(static_cast<std::size_t>(ns) * nt), e(nt, 0.0), xn(nt), yn(ns), col(ns);
  for (int c = 0; c < nt; ++c) {
    e[c] = 1.0;
    Bt.synthesize(L, e.data(), xn.data());
    e[c] = 0.0;
    std::fill(yn.begin(), yn.end(), 0.0);
    m.apply(xn.data(), yn.data(), 1.0);
    Bs.synthesize_transpose(L, yn.data(), col.data());
    for (int r = 0; r < ns; ++r) A[static_cast<std::size_t>(r) * nt + c] = col[r];
  }
  return A;
}

void GridOperator::synth(const Universe& u, const std::vector<double>& in, std::vector<double>& out, bool transpose) const {
  transform_box(u, in, out, transpose);
}

namespace {

// sum_i a_i M_i for bands of equal shape.
NodalBand combine(const std::vector<std::pair<double, const NodalBand*>>& parts) {
  NodalBand out;
  out.rows = parts.front().second->rows;
  out.cols = parts.front().second->cols;
  out.ptr.push_back(0);
  std::vector<std::pair<int, double>> row;
  for (int r = 0; r < out.rows; ++r) {
    row.clear();
    for (auto& [a, m] : parts)
      for (int p = m->ptr[r]; p < m->ptr[r + 1]; ++p) row.push_back({m->col[p], a * m->val[p]});
    std::sort(row.begin(), row.end(), [](auto& x, auto& y) { return x.first < y.first; });
    for (auto& [c, v] : row) {
      if (out.col.size() > static_cast<std::size_t>(out.ptr.back()) && out.col.back() == c) out.val.back() += v;
      else {
        out.col.push_back(c);
        out.val.push_back(v);
      }
    }
    out.ptr.push_back(static_cast<int>(out.col.size()));
  }
  return out;
}

}  // namespace

void GridOperator::nodal_apply(const std::vector<double>& weights, const std::vector<double>& xn, std::vector<double>& yn,
                               bool transpose) const {
  if (weights.size() != comps_.size()) throw std::invalid_argument("grid operator: weight count mismatch");
  const Universe& src = transpose ? test_ : trial_;
  const Universe& dst = transpose ? trial_ : test_;
  yn.assign(dst.size(), 0.0);
  const int s0 = src.n[0], s1 = src.n[1], d1 = dst.n[1];
  thread_local std::vector<double> z;
  // Terms sharing their direction-1 factor are applied together.
  for (auto& g : groups_) {
    std::vector<std::pair<double, const NodalBand*>> parts;
    for (auto [q, t] : g.members) {
      const double a = weights[q] * comps_[q][t].coeff;
      if (a != 0.0) parts.push_back({a, &comps_[q][t].m[0]});
    }
    if (parts.empty()) continue;
    const NodalBand m0 = combine(parts);
    const double* zz = xn.data();
    if (src.dim() == 2) {
      z.assign(static_cast<std::size_t>(s0) * d1, 0.0);
      const NodalBand& m1 = comps_[g.members.front().first][g.members.front().second].m[1];
      for (int p0 = 0; p0 < s0; ++p0) {
        const double* xr = &xn[static_cast<std::size_t>(p0) * s1];
        double* zr = &z[static_cast<std::size_t>(p0) * d1];
        if (transpose) m1.apply_transpose(xr, zr, 1.0);
        else m1.apply(xr, zr, 1.0);
      }
      zz = z.data();
    }
    for (int r = 0; r < m0.rows; ++r)
      for (int p = m0.ptr[r]; p < m0.ptr[r + 1]; ++p) {
        const int c = m0.col[p];
        const double v = m0.val[p];
        const int to = transpose ? c : r, from = transpose ? r : c;
        double* yr = &yn[static_cast<std::size_t>(to) * d1];
        const double* zr = zz + static_cast<std::size_t>(from) * d1;
        for (int k = 0; k < d1; ++k) yr[k] += v * zr[k];
      }
  }
}

void GridOperator::apply(const std::vector<double>& weights, const double* x, double* y) const {
  thread_local std::vector<double> xs, xn, yn, ys;
  xs.resize(trial_.size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = dtrial_[i] * x[i];
  synth(trial_, xs, xn, false);
  nodal_apply(weights, xn, yn, false);
  synth(test_, yn, ys, true);
  for (std::size_t i = 0; i < ys.size(); ++i) y[i] = dtest_[i] * ys[i];
}

void GridOperator::apply_transpose(const std::vector<double>& weights, const double* y, double* x) const {
  thread_local std::vector<double> ys, yn, xn, xs;
  ys.resize(test_.size());
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = dtest_[i] * y[i];
  synth(test_, ys, yn, false);
  nodal_apply(weights, yn, xn, true);
  synth(trial_, xn, xs, true);
  for (std::size_t i = 0; i < xs.size(); ++i) x[i] = dtrial_[i] * xs[i];
}

std::vector<double> GridOperator::apply(const std::vector<double>& weights, const std::vector<double>& x) const {
  if (x.size() != trial_.size()) throw std::invalid_argument("grid operator: input size mismatch");
  std::vector<double> y(test_.size());
  apply(weights, x.data(), y.data());
  return y;
}

std::vector<double> GridOperator::apply_transpose(const std::vector<double>& weights, const std::vector<double>& y) const {
  if (y.size() != test_.size()) throw std::invalid_argument("grid operator: input size mismatch");
  std::vector<double> x(trial_.size());
  apply_transpose(weights, y.data(), x.data());
  return x;
}

std::vector<double> GridOperator::diagonal(const std::vector<double>& weights) const {
  if (trial_.n != test_.n) throw std::invalid_argument("grid operator: diagonal needs equal boxes");
  const int dim = trial_.dim(), n0 = trial_.n[0], n1 = trial_.n[1];
  std::vector<double> out(trial_.size(), 0.0);
  for (std::size_t q = 0; q < comps_.size(); ++q) {
    if (weights[q] == 0.0) continue;
    for (auto& tb : comps_[q]) {
      std::array<std::vector<double>, 2> dg;
      for (int d = 0; d < 2; ++d) dg[d].assign(trial_.n[d], 1.0);
      for (int d = 0; d < dim; ++d)
        for (int p = 0; p < trial_.n[d]; ++p) {
          const auto i = trial_.basis.b[d].at_position(p);
          dg[d][p] = integrate_factor(tb.f[d], function_on_unit(trial_.basis.b[d], i), function_on_unit(test_.basis.b[d], i));
        }
      const double a = weights[q] * tb.coeff;
      for (int p0 = 0; p0 < n0; ++p0)
        for (int p1 = 0; p1 < n1; ++p1) out[static_cast<std::size_t>(p0) * n1 + p1] += a * dg[0][p0] * dg[1][p1];
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= dtrial_[i] * dtest_[i];
  return out;
}

std::vector<double> GridOperator::normal_diagonal(const std::vector<double>& weights) const {
  if (!separable_test_) throw std::logic_error("normal_diagonal: test scaling is not separable");
  std::call_once(pairs_once_, [this] { build_pairs(); });
  const int dim = trial_.dim(), n0 = trial_.n[0], n1 = trial_.n[1];
  const std::size_t T = flat_terms_.size();
  std::vector<double> out(trial_.size(), 0.0);
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = a; b < T; ++b) {
      const auto& ta = flat_terms_[a];
      const auto& tb = flat_terms_[b];
      double w = weights[ta.q] * comps_[ta.q][ta.t].coeff * weights[tb.q] * comps_[tb.q][tb.t].coeff;
      if (w == 0.0) continue;
      if (b != a) w *= 2.0;
      const auto& P = pair_[a * T + b];
      for (int p0 = 0; p0 < n0; ++p0) {
        const double w0 = w * P[0][p0];
        for (int p1 = 0; p1 < n1; ++p1) out[static_cast<std::size_t>(p0) * n1 + p1] += w0 * (dim == 2 ? P[1][p1] : 1.0);
      }
    }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= dtrial_[i] * dtrial_[i];
  return out;
}

std::vector<double> grid_load(const FunctionalComponent& f, const Universe& test, const Scaling& scaling) {
  const int dim = test.dim(), n0 = test.n[0], n1 = test.n[1];
  for (int d = 0; d < dim; ++d) require_bspline(test.basis.b[d]);
  std::vector<double> g(test.size(), 0.0);
  for (auto& t : f.terms) {
    std::array<std::vector<double>, 2> v;
    for (int d = 0; d < 2; ++d) v[d].assign(test.n[d], 1.0);
    for (int d = 0; d < dim; ++d)
      for (int p = 0; p < test.n[d]; ++p) v[d][p] = integrate_load(t.f[d], nodal_hat(test.basis.b[d], test.L[d], p));
    for (int p0 = 0; p0 < n0; ++p0)
      for (int p1 = 0; p1 < n1; ++p1) g[static_cast<std::size_t>(p0) * n1 + p1] += t.coeff * v[0][p0] * v[1][p1];
  }
  std::vector<double> out;
  transform_box(test, g, out, true);
  const auto D = test.scaling(scaling);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= D[i];
  return out;
}

}  // namespace awrb
