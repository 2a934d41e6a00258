#pragma once

#include <vector>

namespace awrb {

struct QuadRule {
  std::vector<double> x;  // nodes on [0,1]
  std::vector<double> w;  // weights summing to 1
};

// Gauss-Legendre rule on [0,1], exact for polynomials of degree 2n-1.
const QuadRule& gauss_legendre(int n);

}  // namespace awrb
