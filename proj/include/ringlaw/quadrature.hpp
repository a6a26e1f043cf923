#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace ringlaw {

/// Gauss-Legendre rule on [-1, 1]: nodes ascending, weights summing to 2.
template <typename Real = double>
struct GaussLegendre {
  using Array = Eigen::Array<Real, Eigen::Dynamic, 1>;
  Array nodes;
  Array weights;
};

// Nodes are roots of P_n found by Newton iteration on the three-term
// recurrence; the cos initial guess separates all roots for any n.
template <typename Real = double>
GaussLegendre<Real> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  GaussLegendre<Real> rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const Real pi = Real(3.14159265358979323846264338327950288L);
  const Real tol = std::numeric_limits<Real>::epsilon() * 4;
  for (int k = 0; k < n; ++k) {
    Real x = -std::cos(pi * (Real(k) + Real(0.75)) / (Real(n) + Real(0.5)));
    Real dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      Real p0 = 1, p1 = x;
      for (int j = 2; j <= n; ++j) {
        Real p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      Real dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) <= tol * (Real(1) + std::abs(x))) break;
    }
    rule.nodes[k] = x;
    rule.weights[k] = 2 / ((1 - x * x) * dp * dp);
  }
  return rule;
}

/// Integrate f over [a, b] with `panels` equal panels of an n-point
/// Gauss-Legendre rule. Endpoints are never evaluated.
template <typename Real = double, typename F>
Real integrate_composite(F&& f, Real a, Real b, int panels, int nodes_per_panel) {
  if (panels < 1 || nodes_per_panel < 1)
    throw std::invalid_argument("integrate_composite: panels and nodes must be >= 1");
  const auto rule = gauss_legendre<Real>(nodes_per_panel);
  const Real h = (b - a) / panels;
  Real total = 0;
  for (int p = 0; p < panels; ++p) {
    const Real lo = a + p * h;
    const Real mid = lo + h / 2;
    const Real half = h / 2;
    Real acc = 0;
    for (int q = 0; q < nodes_per_panel; ++q)
      acc += Real(rule.weights[q]) * f(mid + half * Real(rule.nodes[q]));
    total += acc * half;
  }
  return total;
}

}  // namespace ringlaw
