#pragma once

// Polymers, clusters, Ursell coefficients and the combinatorial plan of the
// truncated log series. Everything here is deterministic; sampling lives in weights.hpp.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "gibbsflow/drift.hpp"
#include "gibbsflow/lattice.hpp"
#include "gibbsflow/path.hpp"

namespace gibbsflow {

enum class PolymerKind { Drift, Interaction, Merged };

std::string to_string(PolymerKind kind);

struct Polymer {
  SiteSet support;
  PolymerKind kind = PolymerKind::Interaction;
  /// i with support = N + i, for drift and merged polymers.
  std::optional<Site> drift_site;
  /// Bit k set when region site k is in the support.
  std::uint64_t mask = 0;

  bool has_drift() const { return kind != PolymerKind::Interaction; }
  bool has_interaction() const { return kind != PolymerKind::Drift; }
};

struct PolymerVocabulary {
  SiteSet region;  ///< at most 64 sites
  std::vector<Polymer> polymers;

  std::uint64_t mask_of(const SiteSet& sites) const;
  SiteSet sites_of(std::uint64_t mask) const;
  std::size_t size() const { return polymers.size(); }
  bool empty() const { return polymers.empty(); }
};

/// Supports with a nonzero Psi inside `region`: drift blocks N + i within the region and active
/// interaction supports, deduplicated (coinciding supports are merged), ordered by support_less.
PolymerVocabulary build_polymer_vocabulary(const SiteSet& region, const DriftSpec& drift, const InteractionSpec& spec);
PolymerVocabulary build_polymer_vocabulary(const Box& region, const DriftSpec& drift, const InteractionSpec& spec);

/// Smallest odd integer strictly above the largest support cardinality, and at least 3.
int compute_p(const PolymerVocabulary& vocabulary);

/// Psi_A = Phi_A + phi_A(X(t)) - phi_A(X(0)), with Phi_{N+i} = -reversed_F(i).
double psi_eval(const Polymer& polymer, const GridPath& path, const DriftSpec& drift, const InteractionSpec& spec);

/// Psi for every polymer of a vocabulary on paths sharing one site layout.
class PsiEvaluator {
 public:
  PsiEvaluator(const PolymerVocabulary& vocabulary, const DriftSpec& drift, const InteractionSpec& spec,
               const GridPath& layout, std::span<const std::size_t> polymers);

  /// psi[k] for polymers[k]. Throws NumericalGuardError on non-finite or |Psi| > 700.
  void evaluate(const GridPath& path, std::span<double> psi) const;

 private:
  struct Entry {
    const Polymer* polymer;
    std::optional<DriftBinding> drift;
    std::vector<std::size_t> columns;
  };
  const InteractionSpec* spec_;
  std::vector<Entry> entries_;
};

struct Cluster {
  std::vector<std::size_t> polymers;  ///< sorted vocabulary indices
  std::uint64_t mask = 0;             ///< union of supports

  int size() const;  ///< |support|
  std::size_t count() const { return polymers.size(); }
  friend bool operator==(const Cluster&, const Cluster&) = default;
};

/// prod over the cluster of (e^{-Psi_A} - 1), with `psi` indexed by vocabulary position.
double k_factor(const Cluster& cluster, std::span<const double> psi);

/// Connected polymer collections (intersection graph) with at most `max_polymers` polymers,
/// optionally restricted to supports containing `anchor`. Ordered by polymer count, then indices.
/// Throws NumericalGuardError when more than `count_limit` clusters would be produced.
std::vector<Cluster> enumerate_clusters(const PolymerVocabulary& vocabulary, std::optional<Site> anchor,
                                        int max_polymers, std::size_t count_limit = 1000000);

std::string describe(const Cluster& cluster, const PolymerVocabulary& vocabulary);

/// Sum over connected spanning subgraphs of a graph on n <= 16 vertices of (-1)^{#edges}.
long long connected_graph_sum(int n, std::span<const std::uint32_t> adjacency);

/// a(gamma_1, ..., gamma_n) = (1/n!) sum over connected spanning subgraphs of the
/// incompatibility graph (edge iff supports intersect) of (-1)^{#edges}.
boost::rational<long long> ursell_coefficient(std::span<const Cluster> tuple);

/// One multiset {gamma_1, ..., gamma_n} of the log series; the coefficient already sums
/// over its n!/prod(m!) orderings.
struct SeriesTerm {
  std::vector<std::size_t> clusters;  ///< nondecreasing indices into SeriesPlan::clusters
  boost::rational<long long> coefficient;
  double coefficient_value = 0.0;
  int order = 0;     ///< n
  int polymers = 0;  ///< total polymer count
};

struct SeriesPlan {
  std::vector<Cluster> clusters;
  std::vector<SeriesTerm> terms;
  int max_polymers = 0;
  /// Some cluster sum beyond the polymer cap was dropped.
  bool truncated = false;
};

/// Terms of log Z with at most `max_polymers` polymers in total; with `anchor`, only
/// tuples whose union support contains it.
SeriesPlan make_series_plan(const PolymerVocabulary& vocabulary, int max_polymers,
                            std::optional<Site> anchor = std::nullopt, std::size_t count_limit = 1000000);

/// sum_terms coefficient * prod w.
double series_value(const SeriesPlan& plan, std::span<const double> weights);
/// d series / d w_gamma for every cluster.
std::vector<double> series_gradient(const SeriesPlan& plan, std::span<const double> weights);

}  // namespace gibbsflow
