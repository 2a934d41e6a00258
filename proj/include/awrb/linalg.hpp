#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace awrb {

using LinearMap = std::function<void(const std::vector<double>& in, std::vector<double>& out)>;

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);
void axpy(double a, const std::vector<double>& x, std::vector<double>& y);

struct EigenBounds {
  double min = 0.0;
  double max = 0.0;
  int iterations = 0;
};

class EigenIterationError : public std::runtime_error {
 public:
  EigenIterationError(const std::string& what, EigenBounds last)
      : std::runtime_error(what), last_iterate(last) {}
  EigenBounds last_iterate;
};

// Extreme eigenvalues of a symmetric positive semidefinite operator by
// Lanczos iteration from a fixed pseudo-random start vector.
EigenBounds lanczos_extremes(int n, const LinearMap& op, int max_iter = 400, double tol = 1e-9,
                             unsigned seed = 12345);

struct CgResult {
  int iterations = 0;
  double residual = 0.0;  // final ||b - A x||
  bool converged = false;
};

class CgStagnation : public std::runtime_error {
 public:
  CgStagnation(const std::string& what, std::vector<double> x, double residual)
      : std::runtime_error(what), last_iterate(std::move(x)), last_residual(residual) {}
  std::vector<double> last_iterate;
  double last_residual;
};

// Preconditioned conjugate gradients for an SPD operator; x is the warm
// start and is overwritten.  Stops when ||b - Ax|| <= abs_tol.  inv_diag may
// be empty (no preconditioning).
CgResult conjugate_gradient(const LinearMap& op, const std::vector<double>& b, std::vector<double>& x,
                            double abs_tol, int max_iter, const std::vector<double>& inv_diag = {});

}  // namespace awrb
