#pragma once

#include <vector>

namespace mixlab {

struct QuadratureRule {
  std::vector<double> points;   // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

/// n-point Gauss-Legendre rule mapped to [0,1]; cached per n.
const QuadratureRule& gauss_legendre(int n);

}  // namespace mixlab
