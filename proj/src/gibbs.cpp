#include "gibbsflow/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/quadrature.hpp"
#include "gibbsflow/random.hpp"

namespace gibbsflow {

namespace {

constexpr std::uint64_t kGibbsStreamTag = 0x6769626273ull;  // "gibbs"

// Supports entering the Gibbs density: touching the box with a boundary, inside it without.
std::vector<SiteSet> density_supports(const GibbsSpec& spec) {
  return spec.boundary ? supports_touching(spec.box, spec.interaction) : supports_inside(spec.box, spec.interaction);
}

// Interaction state: box values plus the boundary collar.
Configuration initial_state(const GibbsSpec& spec) {
  if (!spec.boundary) return Configuration(spec.box, 0.0);
  if (!spec.boundary->box().contains(spec.box.expanded(spec.interaction.range)))
    throw MissingSiteError("boundary condition does not cover the interaction collar");
  Configuration state = *spec.boundary;
  for (const auto& s : spec.box.sites()) state.set(s, 0.0);
  return state;
}

// Supports of `all` containing `site`, with value slots resolved in `state`.
struct LocalTerms {
  std::vector<SiteSet> supports;
  std::vector<std::array<std::size_t, 2>> slots;
};

LocalTerms local_terms(const std::vector<SiteSet>& all, const Site& site, const Configuration& state,
                       const InteractionSpec& spec) {
  LocalTerms terms;
  for (const auto& a : all) {
    if (!spec.is_active(a) || !std::binary_search(a.begin(), a.end(), site)) continue;
    std::array<std::size_t, 2> slot{};
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (!state.contains(a[k])) throw MissingSiteError(fmt::format("no value for site ({})", a[k].to_string()));
      slot[k] = state.box().index_of(a[k]);
    }
    terms.supports.push_back(a);
    terms.slots.push_back(slot);
  }
  return terms;
}

double local_energy(const LocalTerms& terms, const InteractionSpec& spec, std::span<const double> state) {
  double e = 0.0;
  std::array<double, 2> buf{};
  for (std::size_t k = 0; k < terms.supports.size(); ++k) {
    const auto& a = terms.supports[k];
    for (std::size_t q = 0; q < a.size(); ++q) buf[q] = state[terms.slots[k][q]];
    e += spec.potential(a, std::span<const double>(buf.data(), a.size()));
  }
  return e;
}

}  // namespace

double log_unnormalized_density(const GibbsSpec& spec, const Configuration& x) {
  double log_m = 0.0;
  for (const auto& s : spec.box.sites()) log_m += spec.apriori.log_density(x.at(s));
  if (spec.boundary) return -hamiltonian(spec.box, x, *spec.boundary, spec.interaction) + log_m;
  return -free_energy_sum(spec.box, x, spec.interaction) + log_m;
}

double partition_function_quadrature(const GibbsSpec& spec, int order) {
  const std::size_t n = spec.box.size();
  if (n > 3) throw DomainError(fmt::format("tensor quadrature supports at most 3 sites, got {}", n));
  const QuadratureRule rule = apriori_rule(spec.apriori, order);
  Configuration state = initial_state(spec);
  const auto supports = density_supports(spec);
  std::vector<std::size_t> slot(n);
  for (std::size_t k = 0; k < n; ++k) slot[k] = state.box().index_of(spec.box.site_at(k));
  const std::size_t q = rule.size();
  std::size_t total = 1;
  for (std::size_t k = 0; k < n; ++k) total *= q;
  double z = 0.0;
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double w = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      idx[k] = rem % q;
      rem /= q;
      state.values()[slot[k]] = rule.nodes[idx[k]];
      w *= rule.weights[idx[k]];
    }
    if (w == 0.0) continue;
    const double h = sum_potentials(supports, spec.interaction, [&](const Site& s) { return state.at(s); });
    z += w * std::exp(-h);
  }
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericalGuardError(fmt::format("partition function quadrature gave {}", z));
  return z;
}

std::function<double(double)> single_site_kernel(const GibbsSpec& spec, const Site& i, const Configuration& x,
                                                 int order) {
  const auto supports = supports_containing(i, spec.interaction);
  Configuration state = x;
  const auto terms = local_terms(supports, i, state, spec.interaction);
  const std::size_t slot = state.box().index_of(i);
  auto energy = [terms, state, slot, interaction = spec.interaction](double y) mutable {
    state.values()[slot] = y;
    return local_energy(terms, interaction, state.values());
  };
  const QuadratureRule rule = apriori_rule(spec.apriori, order);
  const double norm = rule.integrate([&](double y) { return std::exp(-energy(y)); });
  return [energy, norm](double y) mutable { return std::exp(-energy(y)) / norm; };
}

MarginalCdf::MarginalCdf(const GibbsSpec& spec, const Site& site, int order, double half_width, int n_grid)
    : lo_(-half_width), step_(2.0 * half_width / (n_grid - 1)) {
  if (spec.box.size() > 3) throw DomainError("marginal quadrature supports at most 3 sites");
  if (!spec.box.contains(site)) throw DomainError("marginal site outside the box");
  const QuadratureRule rule = apriori_rule(spec.apriori, order);
  Configuration state = initial_state(spec);
  const auto supports = density_supports(spec);
  std::vector<std::size_t> others;
  for (const auto& s : spec.box.sites())
    if (s != site) others.push_back(state.box().index_of(s));
  const std::size_t own = state.box().index_of(site);
  const std::size_t q = rule.size();
  std::size_t total = 1;
  for (std::size_t k = 0; k < others.size(); ++k) total *= q;

  std::vector<double> density(static_cast<std::size_t>(n_grid));
  for (int g = 0; g < n_grid; ++g) {
    const double y = lo_ + g * step_;
    state.values()[own] = y;
    double acc = 0.0;
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      double w = 1.0;
      for (std::size_t k = 0; k < others.size(); ++k) {
        const std::size_t id = rem % q;
        rem /= q;
        state.values()[others[k]] = rule.nodes[id];
        w *= rule.weights[id];
      }
      const double h = sum_potentials(supports, spec.interaction, [&](const Site& s) { return state.at(s); });
      acc += w * std::exp(-h);
    }
    density[static_cast<std::size_t>(g)] = acc * spec.apriori.density(y);
  }
  // Cumulative trapezoid, normalized by the total mass on the window.
  cdf_.assign(density.size(), 0.0);
  for (std::size_t g = 1; g < density.size(); ++g) cdf_[g] = cdf_[g - 1] + 0.5 * step_ * (density[g - 1] + density[g]);
  const double mass = cdf_.back();
  for (auto& c : cdf_) c /= mass;
}

double MarginalCdf::operator()(double y) const {
  const double u = (y - lo_) / step_;
  if (u <= 0.0) return 0.0;
  const auto k = static_cast<std::size_t>(u);
  if (k + 1 >= cdf_.size()) return 1.0;
  const double frac = u - static_cast<double>(k);
  return cdf_[k] + frac * (cdf_[k + 1] - cdf_[k]);
}

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw DomainError("ks_distance needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double f = cdf(samples[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  return d;
}

Configuration SampleBatch::configuration(std::size_t k) const {
  const auto n = box.size();
  return Configuration(box, std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(k * n),
                                                values.begin() + static_cast<std::ptrdiff_t>((k + 1) * n)));
}

std::vector<double> SampleBatch::marginal(const Site& site) const {
  const std::size_t c = box.index_of(site);
  std::vector<double> out(count());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = values[k * box.size() + c];
  return out;
}

double metropolis_acceptance(const GibbsSpec& spec, const Configuration& x, const Site& i, double y) {
  Configuration state = initial_state(spec);
  for (const auto& s : spec.box.sites()) state.set(s, x.at(s));
  const auto terms = local_terms(density_supports(spec), i, state, spec.interaction);
  const std::size_t slot = state.box().index_of(i);
  const double before = -local_energy(terms, spec.interaction, state.values()) + spec.apriori.log_density(state.values()[slot]);
  state.values()[slot] = y;
  const double after = -local_energy(terms, spec.interaction, state.values()) + spec.apriori.log_density(y);
  return std::min(1.0, std::exp(after - before));
}

SampleBatch sample_gibbs(const GibbsSpec& spec, std::size_t count, std::uint64_t seed, const SamplerOptions& options) {
  if (count < 1) throw DomainError("sample_gibbs needs count >= 1");
  if (options.burn_in < 0 || options.thin < 1) throw DomainError("burn-in must be >= 0 and thin >= 1");
  Configuration state = initial_state(spec);
  const auto supports = density_supports(spec);
  const auto sites = spec.box.sites();
  std::vector<LocalTerms> terms;
  std::vector<std::size_t> slots;
  for (const auto& s : sites) {
    terms.push_back(local_terms(supports, s, state, spec.interaction));
    slots.push_back(state.box().index_of(s));
  }
  StreamEngine rng(SeedStream{seed, derive_stream_index(kGibbsStreamTag, 0)});
  double step = options.initial_step;
  auto values = state.values();

  long accepted = 0;
  long proposed = 0;
  auto sweep = [&]() {
    for (std::size_t k = 0; k < sites.size(); ++k) {
      const double old = values[slots[k]];
      const double before = -local_energy(terms[k], spec.interaction, values) + spec.apriori.log_density(old);
      const double proposal = old + step * rng.normal();
      values[slots[k]] = proposal;
      const double after = -local_energy(terms[k], spec.interaction, values) + spec.apriori.log_density(proposal);
      const double u = rng.uniform();
      ++proposed;
      if (std::log(u) < after - before) {
        ++accepted;
      } else {
        values[slots[k]] = old;
      }
    }
  };

  // Burn-in with step adaptation in windows of 100 sweeps; the step is frozen afterwards.
  constexpr long kWindow = 100;
  for (long b = 0; b < options.burn_in; ++b) {
    sweep();
    if ((b + 1) % kWindow == 0) {
      const double rate = static_cast<double>(accepted) / static_cast<double>(proposed);
      step *= std::exp(rate - options.target_acceptance);
      accepted = 0;
      proposed = 0;
    }
  }
  accepted = 0;
  proposed = 0;

  SampleBatch batch{spec.box, {}, seed, options.burn_in, options.thin, step, 0.0};
  batch.values.reserve(count * sites.size());
  for (std::size_t c = 0; c < count; ++c) {
    for (long k = 0; k < options.thin; ++k) sweep();
    for (std::size_t k = 0; k < sites.size(); ++k) batch.values.push_back(values[slots[k]]);
  }
  batch.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposed);
  return batch;
}

void write_samples_csv(const std::string& file, const SampleBatch& batch) {
  std::ofstream out(file);
  if (!out) throw Error(fmt::format("cannot open {} for writing", file));
  const auto sites = batch.box.sites();
  for (std::size_t k = 0; k < sites.size(); ++k) out << (k ? "," : "") << "x(" << sites[k].to_string() << ")";
  out << '\n';
  for (std::size_t c = 0; c < batch.count(); ++c) {
    for (std::size_t k = 0; k < sites.size(); ++k)
      out << (k ? "," : "") << fmt::format("{:.17g}", batch.values[c * sites.size() + k]);
    out << '\n';
  }
}

}  // namespace gibbsflow
