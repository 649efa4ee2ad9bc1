#pragma once

// Finite-volume Gibbs densities, tensor quadrature for tiny volumes,
// single-site kernels and a random-walk Metropolis sampler.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gibbsflow/lattice.hpp"

namespace gibbsflow {

struct GibbsSpec {
  Box box;
  InteractionSpec interaction;
  AprioriMeasure apriori;
  /// Boundary condition on a box covering the r-collar; absent means free boundary.
  std::optional<Configuration> boundary;
};

/// -h (or minus the free-boundary sum) plus sum_i log m-density(x_i).
double log_unnormalized_density(const GibbsSpec& spec, const Configuration& x);

/// Z by tensor quadrature against m (order per axis). Only |box| <= 3.
double partition_function_quadrature(const GibbsSpec& spec, int order = 161);

/// y -> exp(-h_i(y, x)) / int exp(-h_i(u, x)) m(du): density of the conditional law w.r.t. m.
std::function<double(double)> single_site_kernel(const GibbsSpec& spec, const Site& i, const Configuration& x,
                                                 int order = 161);

/// Tabulated CDF of one site's marginal under the Gibbs measure (|box| <= 3).
class MarginalCdf {
 public:
  MarginalCdf(const GibbsSpec& spec, const Site& site, int order = 161, double half_width = 10.0,
              int n_grid = 8001);
  double operator()(double y) const;

 private:
  double lo_;
  double step_;
  std::vector<double> cdf_;
};

/// Kolmogorov distance sup |F_n - F| between the empirical CDF of `samples` and `cdf`.
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);

struct SamplerOptions {
  long burn_in = 10000;  ///< sweeps
  long thin = 10;        ///< sweeps between stored configurations
  double initial_step = 1.0;
  double target_acceptance = 0.4;
};

struct SampleBatch {
  Box box;
  std::vector<double> values;  ///< count x |box|, row-major, lexicographic site order
  std::uint64_t seed = 0;
  long burn_in = 0;
  long thin = 0;
  double step = 0.0;             ///< proposal scale frozen after burn-in
  double acceptance_rate = 0.0;  ///< over the sampling phase

  std::size_t count() const { return box.size() == 0 ? 0 : values.size() / box.size(); }
  Configuration configuration(std::size_t k) const;
  std::vector<double> marginal(const Site& site) const;
};

SampleBatch sample_gibbs(const GibbsSpec& spec, std::size_t count, std::uint64_t seed,
                         const SamplerOptions& options = {});

/// Metropolis acceptance probability for moving site i of x to y (symmetric proposal).
double metropolis_acceptance(const GibbsSpec& spec, const Configuration& x, const Site& i, double y);

/// One row per configuration, header of site labels, 17 significant digits.
void write_samples_csv(const std::string& file, const SampleBatch& batch);

}  // namespace gibbsflow
