#pragma once

// Monte Carlo cluster weights w(gamma, x) = E_{P^x}[K(gamma)], the truncated log
// series with delta-method errors, decay and Kotecky-Preiss diagnostics, and the
// single-site kernel of the time-t measure.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "gibbsflow/cluster.hpp"
#include "gibbsflow/montecarlo.hpp"
#include "gibbsflow/quadrature.hpp"

namespace gibbsflow {

/// Path sampling parameters. Path s uses SeedStream{root_seed, derive_stream_index(stream_tag, s)}
/// with site-keyed increments, so every cluster sees the same noise on a shared site.
struct PathSampling {
  double t = 0.05;
  int steps = 32;
  std::size_t n_paths = 10000;
  std::uint64_t root_seed = 0;
  std::uint64_t stream_tag = 0;
  Execution execution = Execution::Parallel;

  SeedStream stream(std::size_t s) const { return SeedStream{root_seed, derive_stream_index(stream_tag, s)}; }
};

struct WeightEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  double t = 0.0;
  int steps = 0;
};

/// Evaluates K(gamma) for a fixed set of clusters on shared Brownian paths from one anchor.
/// Paths cover only the union of the cluster supports.
class ClusterSampler {
 public:
  ClusterSampler(const PolymerVocabulary& vocabulary, const DriftSpec& drift, const InteractionSpec& spec,
                 std::span<const Cluster> clusters, const Configuration& anchor, const PathSampling& sampling);

  /// Means of K(gamma) for every cluster.
  std::vector<MeanEstimate> weights() const;
  /// Mean of sum_gamma coefficient[gamma] K(gamma).
  MeanEstimate linear(std::span<const double> coefficients) const;

 private:
  template <class Reduce>
  std::vector<MeanEstimate> run(std::size_t n_outputs, Reduce reduce) const;

  const PolymerVocabulary* vocab_;
  const DriftSpec* drift_;
  const InteractionSpec* spec_;
  std::vector<Cluster> clusters_;
  std::vector<std::size_t> polymers_;                     ///< vocabulary indices in use
  std::vector<std::vector<std::size_t>> local_polymers_;  ///< per cluster, positions in polymers_
  std::vector<Site> sites_;
  Configuration anchor_;
  PathSampling sampling_;
};

WeightEstimate estimate_weight(const PolymerVocabulary& vocabulary, const Cluster& cluster, const DriftSpec& drift,
                               const InteractionSpec& spec, const Configuration& x, const PathSampling& sampling);

/// All clusters on one shared path batch; equal to estimate_weight cluster by cluster.
std::vector<WeightEstimate> estimate_weights(const PolymerVocabulary& vocabulary, std::span<const Cluster> clusters,
                                             const DriftSpec& drift, const InteractionSpec& spec,
                                             const Configuration& x, const PathSampling& sampling);

struct SeriesResult {
  double value = 0.0;
  double std_error = 0.0;
  std::map<int, double> by_order;     ///< n -> contribution
  std::map<int, double> by_polymers;  ///< total polymer count -> contribution
  bool truncated = false;
  std::vector<double> weights;        ///< per plan cluster
};

/// Truncated log series at anchor x. The error is the delta-method standard error from a
/// second pass over the same paths: se of mean(sum_gamma dS/dw_gamma K_gamma).
SeriesResult evaluate_series(const SeriesPlan& plan, const PolymerVocabulary& vocabulary, const DriftSpec& drift,
                             const InteractionSpec& spec, const Configuration& x, const PathSampling& sampling,
                             bool with_error = true);

struct DecayFit {
  std::vector<int> sizes;         ///< cluster sizes |gamma| present
  std::vector<double> max_abs;    ///< max |w| per size over clusters and probes
  double c_hat = 0.0;             ///< fit of log max|w| = -c |gamma|
  double lambda_hat = 0.0;        ///< e^{-c_hat}
  bool finite = true;             ///< false when every weight is zero (c_hat = +inf)
  double c_hat_intercept = 0.0;   ///< slope of the fit with a free intercept
  double intercept = 0.0;
  double c_min = 0.0;             ///< min over sizes of -log(max|w|) / |gamma|
};

/// `sup_weights[k]` is the probe supremum of |w| for clusters[k]; sizes above max_size are ignored.
DecayFit weight_decay_diagnostic(std::span<const Cluster> clusters, std::span<const double> sup_weights,
                                 int max_size = std::numeric_limits<int>::max());

struct KpRow {
  std::size_t cluster = 0;
  int size = 0;
  double lhs = 0.0;  ///< sum over incompatible gamma' of |w(gamma')| e^{|gamma'|}
  bool pass = true;
};

struct KpReport {
  std::vector<KpRow> rows;
  bool all_pass = true;
  double worst_margin = 0.0;  ///< min over gamma of |gamma| - lhs
  std::size_t worst_cluster = 0;
};

/// Truncated Kotecky-Preiss check over the enumerated clusters.
KpReport kp_check(std::span<const Cluster> clusters, std::span<const double> sup_weights);

/// Single-site kernel of the time-t measure at site i, built from the truncated series over
/// tuples containing i. Weights are re-estimated at each y on the same path streams.
class UpsilonKernel {
 public:
  UpsilonKernel(const PolymerVocabulary& vocabulary, const DriftSpec& drift, const InteractionSpec& spec,
                const AprioriMeasure& apriori, const Site& site, const Configuration& x, int max_polymers,
                const PathSampling& sampling, int quadrature_order = 64);

  /// Truncated sum over tuples containing the site, at x with x_i = y.
  double cluster_sum(double y) const;
  /// sum of phi_A(x with x_i = y) over supports A containing the site (inside the region).
  double local_interaction(double y) const;
  /// h_i^t(y) = -cluster_sum(y) + local_interaction(y).
  double time_t_potential(double y) const;
  double log_normalizer() const { return log_normalizer_; }
  double operator()(double y) const;
  /// Integral of the kernel against m on fresh Gauss-Legendre nodes (split in `panels` pieces),
  /// independent of the rule that fixed the normalizer.
  double normalization_check(const AprioriMeasure& apriori, int order = 24, int panels = 8) const;
  const SeriesPlan& plan() const { return plan_; }

 private:
  const PolymerVocabulary* vocab_;
  const DriftSpec* drift_;
  const InteractionSpec* spec_;
  Site site_;
  Configuration x_;
  PathSampling sampling_;
  SeriesPlan plan_;
  std::vector<SiteSet> local_supports_;
  QuadratureRule rule_;
  std::vector<double> node_potential_;
  double log_normalizer_ = 0.0;
};

}  // namespace gibbsflow
