#pragma once

#include <cstddef>
#include <vector>

#include "gibbsflow/lattice.hpp"

namespace gibbsflow {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += weights[k] * f(nodes[k]);
    return acc;
  }
};

/// Gauss-Hermite rule for the weight exp(-x^2) on the real line.
QuadratureRule gauss_hermite(int order);

/// Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int order, double a, double b);

/// Rule for E f(mean + sd * Z), Z standard normal.
QuadratureRule gaussian_expectation_rule(int order, double mean = 0.0, double sd = 1.0);

/// Composite trapezoid rule with `order` equally spaced nodes on [a, b].
QuadratureRule trapezoid_rule(int order, double a, double b);

/// Half width of the window used for integrals against m: 10 sigma for Gaussian m, 12 otherwise.
double apriori_half_width(const AprioriMeasure& m);

/// Rule for integrals against the a priori measure m: trapezoid on [-10 sigma, 10 sigma] for
/// Gaussian m, on [-12, 12] otherwise, weights multiplied by the density.
QuadratureRule apriori_rule(const AprioriMeasure& m, int order);

}  // namespace gibbsflow
