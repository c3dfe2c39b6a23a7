#pragma once

#include <array>
#include <vector>

namespace stokeslab {

/// Gauss-Legendre rule on [0,1] (weights sum to 1).
struct LineRule {
  std::vector<double> x;
  std::vector<double> w;
};
const LineRule& gauss_legendre(int n);

/// Triangle rule in barycentric coordinates; weights are fractions of the
/// triangle area and sum to 1.
struct TriangleRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> w;
  int degree = 0;
};

/// Rule exact for polynomials of the given total degree. Degrees up to 4 use
/// the 6-point Dunavant rule, 5-6 the 12-point Dunavant rule, higher degrees a
/// collapsed Gauss-Legendre product rule.
const TriangleRule& triangle_rule(int degree);

}  // namespace stokeslab
