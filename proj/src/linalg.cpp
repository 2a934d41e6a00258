#include "awrb/linalg.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

namespace awrb {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

namespace {

std::pair<double, double> tridiag_extremes(const std::vector<double>& alpha, const std::vector<double>& beta) {
  const int m = static_cast<int>(alpha.size());
  Eigen::VectorXd d(m), e(std::max(m - 1, 1));
  for (int i = 0; i < m; ++i) d[i] = alpha[i];
  for (int i = 0; i + 1 < m; ++i) e[i] = beta[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(d, e.head(std::max(m - 1, 0)), Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace

EigenBounds lanczos_extremes(int n, const LinearMap& op, int max_iter, double tol, unsigned seed) {
  if (n <= 0) throw std::invalid_argument("lanczos_extremes: empty operator");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> v(n), v_prev(n, 0.0), w(n);
  for (auto& x : v) x = U(rng);
  double nv = norm2(v);
  for (auto& x : v) x /= nv;

  std::vector<double> alpha, beta;
  EigenBounds last;
  double prev_min = 0.0, prev_max = 0.0;
  int stable = 0;
  const int limit = std::min(max_iter, n + 1);
  for (int it = 0; it < limit; ++it) {
    op(v, w);
    double a = dot(w, v);
    alpha.push_back(a);
    for (int i = 0; i < n; ++i) w[i] -= a * v[i] + (beta.empty() ? 0.0 : beta.back()) * v_prev[i];
    double b = norm2(w);
    auto [lo, hi] = tridiag_extremes(alpha, beta);
    last = {lo, hi, it + 1};
    if (it > 0 && std::abs(lo - prev_min) <= tol * std::abs(hi) && std::abs(hi - prev_max) <= tol * std::abs(hi)) {
      if (++stable >= 3) return last;
    } else {
      stable = 0;
    }
    prev_min = lo;
    prev_max = hi;
    if (b <= 1e-14 * std::abs(hi) || static_cast<int>(alpha.size()) >= n) return last;
    beta.push_back(b);
    v_prev.swap(v);
    for (int i = 0; i < n; ++i) v[i] = w[i] / b;
  }
  throw EigenIterationError("lanczos_extremes: no convergence", last);
}

CgResult conjugate_gradient(const LinearMap& op, const std::vector<double>& b, std::vector<double>& x,
                            double abs_tol, int max_iter, const std::vector<double>& inv_diag) {
  const std::size_t n = b.size();
  if (x.size() != n) x.assign(n, 0.0);
  std::vector<double> r(n), z(n), p(n), Ap(n);
  op(x, Ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
  auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (inv_diag.empty()) {
      out = in;
    } else {
      for (std::size_t i = 0; i < n; ++i) out[i] = inv_diag[i] * in[i];
    }
  };
  CgResult res;
  res.residual = norm2(r);
  if (res.residual <= abs_tol) {
    res.converged = true;
    return res;
  }
  precond(r, z);
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    op(p, Ap);
    double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) break;
    double a = rz / pAp;
    axpy(a, p, x);
    axpy(-a, Ap, r);
    res.iterations = it;
    res.residual = norm2(r);
    if (res.residual <= abs_tol) {
      // Guard against drift of the recursive residual.
      op(x, Ap);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
      res.residual = norm2(r);
      if (res.residual <= abs_tol) {
        res.converged = true;
        return res;
      }
    }
    precond(r, z);
    double rz_new = dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw CgStagnation("conjugate_gradient: iteration cap reached", x, res.residual);
}

}  // namespace awrb
