#include "gibbsflow/quadrature.hpp"

#include <cmath>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw DomainError("quadrature order must be >= 1");
  const int n = order;
  QuadratureRule rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  const long double pim4 = 0.7511255444649425L;  // pi^{-1/4}
  long double z = 0.0L;
  const int m = (n + 1) / 2;
  // Newton iteration on the orthonormal Hermite recurrence with the usual asymptotic starts.
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(static_cast<long double>(2 * n + 1)) - 1.85575L * std::pow(static_cast<long double>(2 * n + 1), -0.16667L);
    } else if (i == 1) {
      z -= 1.14L * std::pow(static_cast<long double>(n), 0.426L) / z;
    } else if (i == 2) {
      z = 1.86L * z - 0.86L * rule.nodes[0];
    } else if (i == 3) {
      z = 1.91L * z - 0.91L * rule.nodes[1];
    } else {
      z = 2.0L * z - rule.nodes[static_cast<std::size_t>(i - 2)];
    }
    long double pp = 0.0L;
    for (int its = 0; its < 100; ++its) {
      long double p1 = pim4;
      long double p2 = 0.0L;
      for (int j = 0; j < n; ++j) {
        const long double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0L / (j + 1)) * p2 - std::sqrt(static_cast<long double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0L * n) * p2;
      const long double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) <= 1e-17L * std::max(1.0L, std::fabs(z))) break;
    }
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = static_cast<double>(z);
    rule.nodes[hi] = static_cast<double>(-z);
    rule.weights[lo] = static_cast<double>(2.0L / (pp * pp));
    rule.weights[hi] = rule.weights[lo];
  }
  return rule;
}

QuadratureRule gauss_legendre(int order, double a, double b) {
  if (order < 1) throw DomainError("quadrature order must be >= 1");
  const int n = order;
  QuadratureRule rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  const long double mid = 0.5L * (static_cast<long double>(a) + b);
  const long double half = 0.5L * (static_cast<long double>(b) - a);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    long double z = std::cos(3.14159265358979323846264L * (i + 0.75L) / (n + 0.5L));
    long double pp = 0.0L;
    for (int its = 0; its < 100; ++its) {
      long double p1 = 1.0L;
      long double p2 = 0.0L;
      for (int j = 0; j < n; ++j) {
        const long double p3 = p2;
        p2 = p1;
        p1 = ((2.0L * j + 1.0L) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0L);
      const long double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) <= 1e-18L) break;
    }
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = static_cast<double>(mid - half * z);
    rule.nodes[hi] = static_cast<double>(mid + half * z);
    rule.weights[lo] = static_cast<double>(2.0L * half / ((1.0L - z * z) * pp * pp));
    rule.weights[hi] = rule.weights[lo];
  }
  return rule;
}

QuadratureRule gaussian_expectation_rule(int order, double mean, double sd) {
  QuadratureRule rule = gauss_hermite(order);
  const double scale = std::sqrt(2.0) * sd;
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  for (std::size_t k = 0; k < rule.size(); ++k) {
    rule.nodes[k] = mean + scale * rule.nodes[k];
    rule.weights[k] *= inv_sqrt_pi;
  }
  return rule;
}

QuadratureRule trapezoid_rule(int order, double a, double b) {
  if (order < 2) throw DomainError("trapezoid rule needs at least 2 nodes");
  QuadratureRule rule;
  const double h = (b - a) / (order - 1);
  for (int k = 0; k < order; ++k) {
    rule.nodes.push_back(k == order - 1 ? b : a + k * h);
    rule.weights.push_back(k == 0 || k == order - 1 ? 0.5 * h : h);
  }
  return rule;
}

double apriori_half_width(const AprioriMeasure& m) { return m.gaussian_sigma ? 10.0 * *m.gaussian_sigma : 12.0; }

QuadratureRule apriori_rule(const AprioriMeasure& m, int order) {
  // Trapezoid converges geometrically in the width of the analyticity strip, where Gauss-Hermite
  // stalls near 1e-6 for potentials like tanh(x^2) whose poles sit close to the real axis.
  const double half_width = apriori_half_width(m);
  QuadratureRule rule = trapezoid_rule(order, -half_width, half_width);
  for (std::size_t k = 0; k < rule.size(); ++k) rule.weights[k] *= m.density(rule.nodes[k]);
  return rule;
}

}  // namespace gibbsflow
