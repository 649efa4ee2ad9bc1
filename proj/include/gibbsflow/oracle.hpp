#pragma once

// Brute-force estimators of the time-t density ratio, independent of the cluster series.

#include <cstdint>
#include <functional>
#include <vector>

#include "gibbsflow/drift.hpp"
#include "gibbsflow/gibbs.hpp"
#include "gibbsflow/montecarlo.hpp"
#include "gibbsflow/path.hpp"
#include "gibbsflow/weights.hpp"

namespace gibbsflow {

/// Reference measure of the initial Gibbs density.
///  Lebesgue: E_{P^x}[R o theta], the quantity the cluster series expands.
///  Apriori:  E_{P^x}[R o theta * prod_i g(X_i(t)) / g(x_i)], the ratio f^t / f^0 of the
///            process started from the free-boundary Gibbs measure with a priori density g.
enum class DensityReference { Lebesgue, Apriori };

/// log R(X) = sum over interior i of F_i(X) - sum_{A in region} (phi_A(X(0)) - phi_A(X(t))).
double log_R_functional(const Box& region, const PathView& path, const DriftSpec& drift, const InteractionSpec& spec);
double R_functional(const Box& region, const PathView& path, const DriftSpec& drift, const InteractionSpec& spec);

struct RatioEstimate {
  MeanEstimate ratio;
  /// Mean of |R - 1|; zero exactly when every sample equals 1.
  double mean_abs_deviation = 0.0;
  /// Fraction of samples with R <= 0 (positivity audit).
  double nonpositive_fraction = 0.0;
};

/// Monte Carlo E_{P^x}[R o theta] (times the a priori factor for DensityReference::Apriori).
RatioEstimate oracle_density_ratio(const Configuration& x, const DriftSpec& drift, const InteractionSpec& spec,
                                   const AprioriMeasure& apriori, const PathSampling& sampling,
                                   DensityReference reference = DensityReference::Lebesgue);

/// |region| = 1, zero drift, single-site potential psi: the exact ratio by 1-D adaptive quadrature,
///  Lebesgue: e^{psi(x)} E[e^{-psi(x + sqrt(t) Z)}]; Apriori: additionally weighted by g(.)/g(x).
double convolution_ratio(const std::function<double(double)>& psi, const AprioriMeasure& apriori, double x, double t,
                         DensityReference reference = DensityReference::Lebesgue);

/// Bridge representation: y ~ N(x, t) per site, Brownian bridge from y to x, R on the forward bridge.
RatioEstimate bridge_density_ratio(const Configuration& x, const DriftSpec& drift, const InteractionSpec& spec,
                                   const AprioriMeasure& apriori, const PathSampling& sampling,
                                   DensityReference reference = DensityReference::Lebesgue);

struct KdePoint {
  std::vector<double> point;
  double f0 = 0.0, f0_se = 0.0;
  double ft = 0.0, ft_se = 0.0;
};

struct KdeOptions {
  double t = 0.1;
  int steps = 50;
  std::size_t n_samples = 100000;
  double bandwidth = 0.1;
  std::uint64_t seed = 0;
  SamplerOptions sampler;
  Execution execution = Execution::Parallel;
};

/// Gaussian-kernel estimates of the Lebesgue densities of the initial Gibbs law and of the
/// time-t law (Euler-Maruyama from Gibbs samples) at the probe points. |box| <= 2.
std::vector<KdePoint> direct_density_kde(const GibbsSpec& gibbs, const DriftSpec& drift,
                                         const std::vector<std::vector<double>>& probes, const KdeOptions& options);

}  // namespace gibbsflow
