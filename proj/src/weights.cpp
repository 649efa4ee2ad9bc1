#include "gibbsflow/weights.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

ClusterSampler::ClusterSampler(const PolymerVocabulary& vocabulary, const DriftSpec& drift, const InteractionSpec& spec,
                               std::span<const Cluster> clusters, const Configuration& anchor,
                               const PathSampling& sampling)
    : vocab_(&vocabulary),
      drift_(&drift),
      spec_(&spec),
      clusters_(clusters.begin(), clusters.end()),
      anchor_(anchor),
      sampling_(sampling) {
  for (const auto& c : clusters_) polymers_.insert(polymers_.end(), c.polymers.begin(), c.polymers.end());
  std::sort(polymers_.begin(), polymers_.end());
  polymers_.erase(std::unique(polymers_.begin(), polymers_.end()), polymers_.end());
  for (const auto& c : clusters_) {
    std::vector<std::size_t> local;
    for (std::size_t idx : c.polymers)
      local.push_back(static_cast<std::size_t>(std::lower_bound(polymers_.begin(), polymers_.end(), idx) - polymers_.begin()));
    local_polymers_.push_back(std::move(local));
  }
  std::vector<Site> sites;
  for (std::size_t idx : polymers_) {
    const auto& p = vocabulary.polymers.at(idx);
    sites.insert(sites.end(), p.support.begin(), p.support.end());
  }
  sites_ = make_site_set(std::move(sites));
  for (const auto& s : sites_) (void)anchor_.at(s);
}

template <class Reduce>
std::vector<MeanEstimate> ClusterSampler::run(std::size_t n_outputs, Reduce reduce) const {
  const TimeGrid grid(sampling_.t, sampling_.steps);
  auto make_worker = [&]() {
    GridPath path(grid, sites_);
    PsiEvaluator evaluator(*vocab_, *drift_, *spec_, path, polymers_);
    return [this, &reduce, path = std::move(path), evaluator = std::move(evaluator),
            psi = std::vector<double>(polymers_.size()), kp = std::vector<double>(polymers_.size()),
            kc = std::vector<double>(clusters_.size())](std::size_t s, std::span<double> out) mutable {
      fill_brownian(path, anchor_, sampling_.stream(s));
      evaluator.evaluate(path, psi);
      for (std::size_t k = 0; k < psi.size(); ++k) kp[k] = std::expm1(-psi[k]);
      for (std::size_t c = 0; c < kc.size(); ++c) {
        double prod = 1.0;
        for (std::size_t k : local_polymers_[c]) prod *= kp[k];
        kc[c] = prod;
      }
      reduce(std::span<const double>(kc), out);
    };
  };
  return estimate_means(sampling_.n_paths, n_outputs, make_worker, sampling_.execution);
}

std::vector<MeanEstimate> ClusterSampler::weights() const {
  if (clusters_.empty()) return {};
  return run(clusters_.size(), [](std::span<const double> k, std::span<double> out) {
    std::copy(k.begin(), k.end(), out.begin());
  });
}

MeanEstimate ClusterSampler::linear(std::span<const double> coefficients) const {
  if (coefficients.size() != clusters_.size()) throw DomainError("one coefficient per cluster expected");
  if (clusters_.empty()) return MeanEstimate{0.0, 0.0, sampling_.n_paths};
  return run(1, [coefficients](std::span<const double> k, std::span<double> out) {
    double acc = 0.0;
    for (std::size_t c = 0; c < k.size(); ++c) acc += coefficients[c] * k[c];
    out[0] = acc;
  })[0];
}

namespace {

WeightEstimate to_weight(const MeanEstimate& m, const PathSampling& sampling) {
  return WeightEstimate{m.mean, m.std_error, m.count, sampling.t, sampling.steps};
}

}  // namespace

WeightEstimate estimate_weight(const PolymerVocabulary& vocabulary, const Cluster& cluster, const DriftSpec& drift,
                               const InteractionSpec& spec, const Configuration& x, const PathSampling& sampling) {
  const ClusterSampler sampler(vocabulary, drift, spec, std::span<const Cluster>(&cluster, 1), x, sampling);
  return to_weight(sampler.weights().at(0), sampling);
}

std::vector<WeightEstimate> estimate_weights(const PolymerVocabulary& vocabulary, std::span<const Cluster> clusters,
                                             const DriftSpec& drift, const InteractionSpec& spec,
                                             const Configuration& x, const PathSampling& sampling) {
  const ClusterSampler sampler(vocabulary, drift, spec, clusters, x, sampling);
  std::vector<WeightEstimate> out;
  for (const auto& m : sampler.weights()) out.push_back(to_weight(m, sampling));
  return out;
}

SeriesResult evaluate_series(const SeriesPlan& plan, const PolymerVocabulary& vocabulary, const DriftSpec& drift,
                             const InteractionSpec& spec, const Configuration& x, const PathSampling& sampling,
                             bool with_error) {
  SeriesResult result;
  result.truncated = plan.truncated;
  if (plan.clusters.empty()) return result;
  const ClusterSampler sampler(vocabulary, drift, spec, plan.clusters, x, sampling);
  for (const auto& m : sampler.weights()) result.weights.push_back(m.mean);
  for (const auto& term : plan.terms) {
    double prod = term.coefficient_value;
    for (std::size_t c : term.clusters) prod *= result.weights[c];
    result.value += prod;
    result.by_order[term.order] += prod;
    result.by_polymers[term.polymers] += prod;
  }
  if (with_error) {
    const auto grad = series_gradient(plan, result.weights);
    result.std_error = sampler.linear(grad).std_error;
  }
  return result;
}

DecayFit weight_decay_diagnostic(std::span<const Cluster> clusters, std::span<const double> sup_weights, int max_size) {
  if (clusters.size() != sup_weights.size()) throw DomainError("one weight per cluster expected");
  std::map<int, double> per_size;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const int s = clusters[k].size();
    if (s > max_size) continue;
    auto& m = per_size[s];
    m = std::max(m, std::abs(sup_weights[k]));
  }
  if (per_size.size() < 2) throw DomainError(fmt::format("decay fit needs at least 2 cluster sizes, got {}", per_size.size()));
  DecayFit fit;
  for (const auto& [s, m] : per_size) {
    fit.sizes.push_back(s);
    fit.max_abs.push_back(m);
  }
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < fit.sizes.size(); ++k) {
    if (fit.max_abs[k] > 0.0) {
      xs.push_back(fit.sizes[k]);
      ys.push_back(std::log(fit.max_abs[k]));
    }
  }
  if (xs.empty()) {
    fit.finite = false;
    fit.c_hat = fit.c_hat_intercept = fit.c_min = std::numeric_limits<double>::infinity();
    fit.lambda_hat = 0.0;
    return fit;
  }
  double sxy = 0.0, sxx = 0.0;
  fit.c_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += xs[k] * ys[k];
    sxx += xs[k] * xs[k];
    fit.c_min = std::min(fit.c_min, -ys[k] / xs[k]);
  }
  fit.c_hat = -sxy / sxx;
  fit.lambda_hat = std::exp(-fit.c_hat);
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      mx += xs[k] / n;
      my += ys[k] / n;
    }
    double cov = 0.0, var = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      cov += (xs[k] - mx) * (ys[k] - my);
      var += (xs[k] - mx) * (xs[k] - mx);
    }
    fit.c_hat_intercept = -cov / var;
    fit.intercept = my + fit.c_hat_intercept * mx;
  } else {
    fit.c_hat_intercept = fit.c_hat;
  }
  return fit;
}

KpReport kp_check(std::span<const Cluster> clusters, std::span<const double> sup_weights) {
  if (clusters.size() != sup_weights.size()) throw DomainError("one weight per cluster expected");
  std::vector<double> term(clusters.size());
  for (std::size_t k = 0; k < clusters.size(); ++k)
    term[k] = std::abs(sup_weights[k]) * std::exp(static_cast<double>(clusters[k].size()));
  KpReport report;
  report.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    KpRow row;
    row.cluster = k;
    row.size = clusters[k].size();
    for (std::size_t q = 0; q < clusters.size(); ++q)
      if (clusters[k].mask & clusters[q].mask) row.lhs += term[q];
    row.pass = row.lhs <= row.size;
    report.all_pass = report.all_pass && row.pass;
    const double margin = row.size - row.lhs;
    if (margin < report.worst_margin) {
      report.worst_margin = margin;
      report.worst_cluster = k;
    }
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------

UpsilonKernel::UpsilonKernel(const PolymerVocabulary& vocabulary, const DriftSpec& drift, const InteractionSpec& spec,
                             const AprioriMeasure& apriori, const Site& site, const Configuration& x, int max_polymers,
                             const PathSampling& sampling, int quadrature_order)
    : vocab_(&vocabulary),
      drift_(&drift),
      spec_(&spec),
      site_(site),
      x_(x),
      sampling_(sampling),
      plan_(make_series_plan(vocabulary, max_polymers, site)),
      rule_(apriori_rule(apriori, quadrature_order)) {
  for (auto& a : supports_containing(site, spec)) {
    const bool inside = std::all_of(a.begin(), a.end(), [&](const Site& s) {
      return std::binary_search(vocabulary.region.begin(), vocabulary.region.end(), s);
    });
    if (inside && spec.is_active(a)) local_supports_.push_back(std::move(a));
  }
  node_potential_.reserve(rule_.size());
  double top = -std::numeric_limits<double>::infinity();
  for (double y : rule_.nodes) {
    node_potential_.push_back(time_t_potential(y));
    top = std::max(top, -node_potential_.back());
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < rule_.size(); ++k) acc += rule_.weights[k] * std::exp(-node_potential_[k] - top);
  log_normalizer_ = top + std::log(acc);
}

double UpsilonKernel::cluster_sum(double y) const {
  Configuration xy = x_;
  xy.set(site_, y);
  return evaluate_series(plan_, *vocab_, *drift_, *spec_, xy, sampling_, false).value;
}

double UpsilonKernel::local_interaction(double y) const {
  Configuration xy = x_;
  xy.set(site_, y);
  return sum_potentials(local_supports_, *spec_, [&](const Site& s) { return xy.at(s); });
}

double UpsilonKernel::time_t_potential(double y) const { return -cluster_sum(y) + local_interaction(y); }

double UpsilonKernel::operator()(double y) const { return std::exp(-time_t_potential(y) - log_normalizer_); }

double UpsilonKernel::normalization_check(const AprioriMeasure& apriori, int order, int panels) const {
  const double w = apriori_half_width(apriori);
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = -w + 2.0 * w * p / panels;
    const auto rule = gauss_legendre(order, a, a + 2.0 * w / panels);
    for (std::size_t k = 0; k < rule.size(); ++k) acc += rule.weights[k] * apriori.density(rule.nodes[k]) * (*this)(rule.nodes[k]);
  }
  return acc;
}

}  // namespace gibbsflow
