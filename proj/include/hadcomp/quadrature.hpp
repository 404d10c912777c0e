#pragma once

// Gauss-Legendre rules on [-1, 1] and their rational map onto (0, inf).

#include <boost/math/special_functions/legendre.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "hadcomp/error.hpp"

namespace hadcomp {

struct QuadratureRule {
  std::vector<double> x;
  std::vector<double> w;

  std::size_t size() const { return x.size(); }
};

/// n-point Gauss-Legendre rule on [-1, 1], nodes ascending.
inline QuadratureRule gauss_legendre(std::size_t n) {
  if (n == 0) throw Error(ErrorKind::invalid_argument, "Gauss-Legendre rule needs n >= 1");
  const auto zeros = boost::math::legendre_p_zeros<double>(static_cast<int>(n));  // non-negative half
  QuadratureRule rule;
  auto weight = [n](double x) {
    const double dp = boost::math::legendre_p_prime(static_cast<int>(n), x);
    return 2.0 / ((1.0 - x * x) * dp * dp);
  };
  for (auto it = zeros.rbegin(); it != zeros.rend(); ++it) {
    if (*it == 0.0) continue;
    rule.x.push_back(-*it);
    rule.w.push_back(weight(*it));
  }
  if (n % 2 == 1) {
    rule.x.push_back(0.0);
    rule.w.push_back(weight(0.0));
  }
  for (double z : zeros) {
    if (z == 0.0) continue;
    rule.x.push_back(z);
    rule.w.push_back(weight(z));
  }
  return rule;
}

/// Gauss-Legendre nodes mapped by k = c (1 + x)/(1 - x) onto (0, inf).
/// Half the nodes land below c.
inline QuadratureRule rational_map_rule(std::size_t n, double c) {
  if (!(c > 0.0)) throw Error(ErrorKind::invalid_argument, "map scale must be positive");
  const QuadratureRule gl = gauss_legendre(n);
  QuadratureRule rule;
  rule.x.reserve(n);
  rule.w.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = gl.x[i];
    rule.x.push_back(c * (1.0 + x) / (1.0 - x));
    rule.w.push_back(gl.w[i] * 2.0 * c / ((1.0 - x) * (1.0 - x)));
  }
  return rule;
}

}  // namespace hadcomp
