#include "gibbsflow/cluster.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

std::string to_string(PolymerKind kind) {
  switch (kind) {
    case PolymerKind::Drift: return "drift";
    case PolymerKind::Interaction: return "interaction";
    case PolymerKind::Merged: return "merged";
  }
  return "unknown";
}

std::uint64_t PolymerVocabulary::mask_of(const SiteSet& sites) const {
  std::uint64_t mask = 0;
  for (const auto& s : sites) {
    const auto it = std::lower_bound(region.begin(), region.end(), s);
    if (it == region.end() || *it != s) throw DomainError(fmt::format("site ({}) outside the polymer region", s.to_string()));
    mask |= std::uint64_t{1} << (it - region.begin());
  }
  return mask;
}

SiteSet PolymerVocabulary::sites_of(std::uint64_t mask) const {
  SiteSet out;
  for (std::size_t k = 0; k < region.size(); ++k)
    if (mask >> k & 1u) out.push_back(region[k]);
  return out;
}

PolymerVocabulary build_polymer_vocabulary(const SiteSet& region_in, const DriftSpec& drift, const InteractionSpec& spec) {
  PolymerVocabulary vocab;
  vocab.region = make_site_set(region_in);
  if (vocab.region.size() > 64) throw DomainError("polymer regions are limited to 64 sites");
  if (vocab.region.empty()) return vocab;
  auto inside = [&](const SiteSet& a) {
    return std::all_of(a.begin(), a.end(), [&](const Site& s) { return std::binary_search(vocab.region.begin(), vocab.region.end(), s); });
  };

  // Bounding box of the region.
  const int dim = vocab.region.front().dim();
  std::vector<int> lo(static_cast<std::size_t>(dim)), hi(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k) {
    lo[static_cast<std::size_t>(k)] = hi[static_cast<std::size_t>(k)] = vocab.region.front()[k];
    for (const auto& s : vocab.region) {
      lo[static_cast<std::size_t>(k)] = std::min(lo[static_cast<std::size_t>(k)], s[k]);
      hi[static_cast<std::size_t>(k)] = std::max(hi[static_cast<std::size_t>(k)], s[k]);
    }
  }
  const Box bbox{Site(std::span<const int>(lo)), Site(std::span<const int>(hi))};

  std::vector<Polymer> polymers;
  for (auto& a : supports_inside(bbox, spec)) {
    if (!spec.is_active(a) || !inside(a)) continue;
    Polymer p;
    p.support = std::move(a);
    p.kind = PolymerKind::Interaction;
    polymers.push_back(std::move(p));
  }
  if (!drift.is_zero()) {
    if (drift.dim() != dim) throw DomainError("drift and region dimensions differ");
    for (const auto& i : vocab.region) {
      SiteSet block = drift.block(i);
      if (!inside(block)) continue;
      auto same = std::find_if(polymers.begin(), polymers.end(), [&](const Polymer& p) { return p.support == block; });
      if (same != polymers.end()) {
        same->kind = PolymerKind::Merged;
        same->drift_site = i;
      } else {
        Polymer p;
        p.support = std::move(block);
        p.kind = PolymerKind::Drift;
        p.drift_site = i;
        polymers.push_back(std::move(p));
      }
    }
  }
  std::sort(polymers.begin(), polymers.end(), [](const Polymer& a, const Polymer& b) { return support_less(a.support, b.support); });
  for (auto& p : polymers) p.mask = vocab.mask_of(p.support);
  vocab.polymers = std::move(polymers);
  return vocab;
}

PolymerVocabulary build_polymer_vocabulary(const Box& region, const DriftSpec& drift, const InteractionSpec& spec) {
  return build_polymer_vocabulary(region.sites(), drift, spec);
}

int compute_p(const PolymerVocabulary& vocabulary) {
  if (vocabulary.empty()) throw DomainError("compute_p needs a nonempty vocabulary");
  std::size_t n = 0;
  for (const auto& p : vocabulary.polymers) n = std::max(n, p.support.size());
  int p = static_cast<int>(n) + 1;
  if (p % 2 == 0) ++p;
  return std::max(p, 3);
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kPsiGuard = 700.0;

double endpoint_difference(const InteractionSpec& spec, const SiteSet& support, const GridPath& path,
                           std::span<const std::size_t> columns) {
  std::array<double, 2> at_t{};
  std::array<double, 2> at_0{};
  const int m = path.steps();
  for (std::size_t k = 0; k < support.size(); ++k) {
    at_t[k] = path(m, columns[k]);
    at_0[k] = path(0, columns[k]);
  }
  return spec.potential(support, std::span<const double>(at_t.data(), support.size())) -
         spec.potential(support, std::span<const double>(at_0.data(), support.size()));
}

}  // namespace

PsiEvaluator::PsiEvaluator(const PolymerVocabulary& vocabulary, const DriftSpec& drift, const InteractionSpec& spec,
                           const GridPath& layout, std::span<const std::size_t> polymers)
    : spec_(&spec) {
  for (std::size_t idx : polymers) {
    const Polymer& p = vocabulary.polymers.at(idx);
    Entry e{&p, std::nullopt, {}};
    if (p.has_drift()) e.drift = bind_drift(drift, *p.drift_site, layout);
    if (p.has_interaction()) {
      if (p.support.size() > 2) throw DomainError("interaction supports are singletons or pairs");
      for (const auto& s : p.support) e.columns.push_back(layout.column(s));
    }
    entries_.push_back(std::move(e));
  }
}

void PsiEvaluator::evaluate(const GridPath& path, std::span<double> psi) const {
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const Entry& e = entries_[k];
    double v = 0.0;
    if (e.drift) v -= reversed_F(*e.drift, path);
    if (e.polymer->has_interaction()) v += endpoint_difference(*spec_, e.polymer->support, path, e.columns);
    if (!std::isfinite(v) || std::abs(v) > kPsiGuard)
      throw NumericalGuardError(fmt::format("Psi = {} on support {}: drift or interaction bounds violated", v,
                                            to_string(e.polymer->support)));
    psi[k] = v;
  }
}

double psi_eval(const Polymer& polymer, const GridPath& path, const DriftSpec& drift, const InteractionSpec& spec) {
  double v = 0.0;
  if (polymer.has_drift()) v -= reversed_F(drift, *polymer.drift_site, path);
  if (polymer.has_interaction()) {
    std::vector<std::size_t> columns;
    for (const auto& s : polymer.support) columns.push_back(path.column(s));
    v += endpoint_difference(spec, polymer.support, path, columns);
  }
  return v;
}

int Cluster::size() const { return std::popcount(mask); }

double k_factor(const Cluster& cluster, std::span<const double> psi) {
  double k = 1.0;
  for (std::size_t idx : cluster.polymers) k *= std::expm1(-psi[idx]);
  return k;
}

// ---------------------------------------------------------------------------

namespace {

bool cluster_less(const Cluster& a, const Cluster& b) {
  if (a.polymers.size() != b.polymers.size()) return a.polymers.size() < b.polymers.size();
  return a.polymers < b.polymers;
}

}  // namespace

std::vector<Cluster> enumerate_clusters(const PolymerVocabulary& vocab, std::optional<Site> anchor, int max_polymers,
                                        std::size_t count_limit) {
  if (max_polymers < 1) throw DomainError("max_polymers must be >= 1");
  const std::size_t n = vocab.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && (vocab.polymers[a].mask & vocab.polymers[b].mask)) adj[a].push_back(b);

  std::vector<Cluster> out;
  std::vector<std::size_t> current;
  std::vector<char> in_sub(n, 0);
  std::vector<int> touch(n, 0);  // # of current members adjacent to or equal to the vertex

  auto add_touch = [&](std::size_t v, int delta) {
    touch[v] += delta;
    for (std::size_t u : adj[v]) touch[u] += delta;
  };

  // ESU enumeration: every connected vertex set is produced exactly once, rooted at its minimum.
  std::function<void(std::size_t, std::vector<std::size_t>)> extend = [&](std::size_t root, std::vector<std::size_t> ext) {
    Cluster c;
    c.polymers = current;
    std::sort(c.polymers.begin(), c.polymers.end());
    for (std::size_t idx : c.polymers) c.mask |= vocab.polymers[idx].mask;
    out.push_back(std::move(c));
    if (out.size() > count_limit)
      throw NumericalGuardError(fmt::format("cluster enumeration exceeded the limit of {}", count_limit));
    if (static_cast<int>(current.size()) == max_polymers) return;
    while (!ext.empty()) {
      const std::size_t w = ext.back();
      ext.pop_back();
      std::vector<std::size_t> next = ext;
      for (std::size_t u : adj[w])
        if (u > root && touch[u] == 0 && std::find(next.begin(), next.end(), u) == next.end()) next.push_back(u);
      current.push_back(w);
      in_sub[w] = 1;
      add_touch(w, 1);
      extend(root, std::move(next));
      add_touch(w, -1);
      in_sub[w] = 0;
      current.pop_back();
    }
  };

  for (std::size_t v = 0; v < n; ++v) {
    current = {v};
    in_sub[v] = 1;
    add_touch(v, 1);
    std::vector<std::size_t> ext;
    for (std::size_t u : adj[v])
      if (u > v) ext.push_back(u);
    extend(v, ext);
    add_touch(v, -1);
    in_sub[v] = 0;
  }

  if (anchor) {
    const std::uint64_t bit = vocab.mask_of({*anchor});
    std::erase_if(out, [&](const Cluster& c) { return (c.mask & bit) == 0; });
  }
  std::sort(out.begin(), out.end(), cluster_less);
  return out;
}

std::string describe(const Cluster& cluster, const PolymerVocabulary& vocab) {
  std::string s;
  for (std::size_t k = 0; k < cluster.polymers.size(); ++k) {
    if (k) s += " ";
    s += "{" + to_string(vocab.polymers[cluster.polymers[k]].support) + "}";
  }
  return s;
}

// ---------------------------------------------------------------------------

long long connected_graph_sum(int n, std::span<const std::uint32_t> adjacency) {
  if (n < 1 || n > 16) throw DomainError("connected_graph_sum supports 1..16 vertices");
  const std::uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1u);
  std::vector<long long> c(std::size_t{1} << n, 0);
  auto independent = [&](std::uint32_t s) {
    for (int v = 0; v < n; ++v)
      if ((s >> v & 1u) && (adjacency[static_cast<std::size_t>(v)] & s)) return false;
    return true;
  };
  // c(S) = f(S) - sum_{T strict subset of S, T contains min S} c(T) f(S \ T),
  // where f(S) = sum over all subgraphs on S of (-1)^{#edges} = [S independent].
  for (std::uint32_t s = 1; s <= full; ++s) {
    const std::uint32_t low = s & (~s + 1u);
    long long value = independent(s) ? 1 : 0;
    const std::uint32_t rest = s & ~low;
    for (std::uint32_t sub = (rest - 1u) & rest;; sub = (sub - 1u) & rest) {
      // T = low | sub, proper subset of S.
      const std::uint32_t t = low | sub;
      if (t != s && independent(s & ~t)) value -= c[t];
      if (sub == 0) break;
    }
    c[s] = value;
  }
  return c[full];
}

namespace {

std::vector<std::uint32_t> incompatibility(std::span<const Cluster> tuple) {
  const std::size_t n = tuple.size();
  std::vector<std::uint32_t> adj(n, 0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && (tuple[a].mask & tuple[b].mask)) adj[a] |= 1u << b;
  return adj;
}

long long factorial(int n) {
  long long f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

}  // namespace

boost::rational<long long> ursell_coefficient(std::span<const Cluster> tuple) {
  const int n = static_cast<int>(tuple.size());
  if (n < 1) throw DomainError("ursell_coefficient needs at least one cluster");
  const auto adj = incompatibility(tuple);
  return boost::rational<long long>(connected_graph_sum(n, adj), factorial(n));
}

SeriesPlan make_series_plan(const PolymerVocabulary& vocab, int max_polymers, std::optional<Site> anchor,
                            std::size_t count_limit) {
  SeriesPlan plan;
  plan.max_polymers = max_polymers;
  plan.clusters = enumerate_clusters(vocab, std::nullopt, max_polymers, count_limit);
  plan.truncated = static_cast<int>(vocab.size()) > max_polymers;
  const std::uint64_t anchor_bit = anchor ? vocab.mask_of({*anchor}) : 0;

  std::vector<std::size_t> chosen;
  std::vector<Cluster> members;
  std::function<void(std::size_t, int)> dfs = [&](std::size_t first, int budget) {
    if (!chosen.empty()) {
      std::uint64_t mask = 0;
      for (const auto& c : members) mask |= c.mask;
      const bool keep = !anchor || (mask & anchor_bit);
      if (keep) {
        const auto adj = incompatibility(members);
        const long long phi = connected_graph_sum(static_cast<int>(members.size()), adj);
        if (phi != 0) {
          long long multiplicity = 1;
          std::size_t run = 1;
          for (std::size_t k = 1; k <= chosen.size(); ++k) {
            if (k < chosen.size() && chosen[k] == chosen[k - 1]) {
              ++run;
            } else {
              multiplicity *= factorial(static_cast<int>(run));
              run = 1;
            }
          }
          SeriesTerm term;
          term.clusters = chosen;
          term.coefficient = boost::rational<long long>(phi, multiplicity);
          term.coefficient_value = boost::rational_cast<double>(term.coefficient);
          term.order = static_cast<int>(chosen.size());
          term.polymers = max_polymers - budget;
          plan.terms.push_back(std::move(term));
          if (plan.terms.size() > count_limit)
            throw NumericalGuardError(fmt::format("series plan exceeded the limit of {} terms", count_limit));
        }
      }
    }
    for (std::size_t k = first; k < plan.clusters.size(); ++k) {
      const int cost = static_cast<int>(plan.clusters[k].count());
      if (cost > budget) break;  // clusters are ordered by polymer count
      chosen.push_back(k);
      members.push_back(plan.clusters[k]);
      dfs(k, budget - cost);
      members.pop_back();
      chosen.pop_back();
    }
  };
  dfs(0, max_polymers);

  if (anchor) {
    // Keep only clusters some anchored term uses.
    std::vector<std::size_t> remap(plan.clusters.size(), SIZE_MAX);
    for (const auto& term : plan.terms)
      for (std::size_t c : term.clusters) remap[c] = 0;
    std::vector<Cluster> used;
    for (std::size_t c = 0; c < plan.clusters.size(); ++c) {
      if (remap[c] == SIZE_MAX) continue;
      remap[c] = used.size();
      used.push_back(plan.clusters[c]);
    }
    for (auto& term : plan.terms)
      for (auto& c : term.clusters) c = remap[c];
    plan.clusters = std::move(used);
  }
  return plan;
}

double series_value(const SeriesPlan& plan, std::span<const double> weights) {
  double total = 0.0;
  for (const auto& term : plan.terms) {
    double prod = term.coefficient_value;
    for (std::size_t c : term.clusters) prod *= weights[c];
    total += prod;
  }
  return total;
}

std::vector<double> series_gradient(const SeriesPlan& plan, std::span<const double> weights) {
  std::vector<double> grad(plan.clusters.size(), 0.0);
  for (const auto& term : plan.terms) {
    for (std::size_t k = 0; k < term.clusters.size(); ++k) {
      if (k > 0 && term.clusters[k] == term.clusters[k - 1]) continue;
      // d/dw of w^m * rest = m w^{m-1} rest: sum over the positions holding this cluster.
      double d = 0.0;
      for (std::size_t pos = 0; pos < term.clusters.size(); ++pos) {
        if (term.clusters[pos] != term.clusters[k]) continue;
        double prod = term.coefficient_value;
        for (std::size_t q = 0; q < term.clusters.size(); ++q)
          if (q != pos) prod *= weights[term.clusters[q]];
        d += prod;
      }
      grad[term.clusters[k]] += d;
    }
  }
  return grad;
}

}  // namespace gibbsflow
