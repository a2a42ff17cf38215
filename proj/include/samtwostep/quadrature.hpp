#pragma once

#include <cmath>
#include <utility>
#include <vector>

namespace samtwostep {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre nodes/weights by Newton iteration on P_n, seeded with the
// Chebyshev-based asymptotic approximation. Exact for degree <= 2n-1.
inline QuadratureRule gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int l = 1; l < n; ++l) {
        double p2 = ((2.0 * l + 1.0) * x * p1 - l * p0) / (l + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
template <typename F>
double integrate(F&& f, double a, double b, int n) {
  const QuadratureRule rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b);
  const double halfwidth = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    sum += rule.weights[i] * f(mid + halfwidth * rule.nodes[i]);
  }
  return halfwidth * sum;
}

}  // namespace samtwostep
