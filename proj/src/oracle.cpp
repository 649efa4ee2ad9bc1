#include "gibbsflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

namespace {

constexpr double kLogGuard = 700.0;
constexpr std::uint32_t kEndpointLaneBit = 0x40000000u;
constexpr std::uint64_t kKdeInitialTag = 0x6b64652d696e6974ull;
constexpr std::uint64_t kKdeDynamicsTag = 0x6b64652d64796eull;

struct RFunctional {
  RFunctional(const Box& region, const DriftSpec& drift, const InteractionSpec& spec, const GridPath& layout)
      : spec(&spec), supports(supports_inside(region, spec)) {
    if (!drift.is_zero()) {
      for (const auto& i : region.sites()) {
        const SiteSet block = drift.block(i);
        if (std::all_of(block.begin(), block.end(), [&](const Site& s) { return region.contains(s); }))
          bindings.push_back(bind_drift(drift, i, layout));
      }
    }
    std::erase_if(supports, [&](const SiteSet& a) { return !spec.is_active(a); });
    for (const auto& a : supports) {
      std::array<std::size_t, 2> c{};
      for (std::size_t k = 0; k < a.size(); ++k) c[k] = layout.column(a[k]);
      columns.push_back(c);
    }
  }

  double log_value(const PathView& p) const {
    double v = 0.0;
    for (const auto& b : bindings) v += girsanov_F(b, p).value;
    const int m = p.steps();
    std::array<double, 2> at0{}, att{};
    for (std::size_t k = 0; k < supports.size(); ++k) {
      const auto& a = supports[k];
      for (std::size_t q = 0; q < a.size(); ++q) {
        at0[q] = p(0, columns[k][q]);
        att[q] = p(m, columns[k][q]);
      }
      v -= spec->potential(a, std::span<const double>(at0.data(), a.size())) -
           spec->potential(a, std::span<const double>(att.data(), a.size()));
    }
    return v;
  }

  const InteractionSpec* spec;
  std::vector<SiteSet> supports;
  std::vector<std::array<std::size_t, 2>> columns;
  std::vector<DriftBinding> bindings;
};

double guarded_exp(double log_value, const char* what) {
  if (!std::isfinite(log_value) || std::abs(log_value) > kLogGuard)
    throw NumericalGuardError(fmt::format("log {} = {}: drift or interaction bounds violated", what, log_value));
  return std::exp(log_value);
}

}  // namespace

double log_R_functional(const Box& region, const PathView& path, const DriftSpec& drift, const InteractionSpec& spec) {
  return RFunctional(region, drift, spec, path.path()).log_value(path);
}

double R_functional(const Box& region, const PathView& path, const DriftSpec& drift, const InteractionSpec& spec) {
  return guarded_exp(log_R_functional(region, path, drift, spec), "R");
}

RatioEstimate oracle_density_ratio(const Configuration& x, const DriftSpec& drift, const InteractionSpec& spec,
                                   const AprioriMeasure& apriori, const PathSampling& sampling,
                                   DensityReference reference) {
  const Box& region = x.box();
  const TimeGrid grid(sampling.t, sampling.steps);
  const bool apriori_factor = reference == DensityReference::Apriori;
  auto make_worker = [&]() {
    GridPath path(grid, region.sites());
    RFunctional r(region, drift, spec, path);
    return [&, path = std::move(path), r = std::move(r)](std::size_t s, std::span<double> out) mutable {
      fill_brownian(path, x, sampling.stream(s));
      double log_r = r.log_value(PathView(path, true));
      if (apriori_factor) {
        const int m = path.steps();
        for (std::size_t c = 0; c < path.n_sites(); ++c)
          log_r += apriori.log_density(path(m, c)) - apriori.log_density(path(0, c));
      }
      const double value = guarded_exp(log_r, "R o theta");
      out[0] = value;
      out[1] = std::abs(value - 1.0);
      out[2] = value <= 0.0 ? 1.0 : 0.0;
    };
  };
  const auto m = estimate_means(sampling.n_paths, 3, make_worker, sampling.execution);
  return RatioEstimate{m[0], m[1].mean, m[2].mean};
}

double convolution_ratio(const std::function<double(double)>& psi, const AprioriMeasure& apriori, double x, double t,
                         DensityReference reference) {
  if (!(t > 0.0)) throw DomainError("convolution_ratio needs t > 0");
  const double sd = std::sqrt(t);
  const double log_gx = apriori.log_density(x);
  const bool with_g = reference == DensityReference::Apriori;
  auto integrand = [&](double z) {
    const double y = x + sd * z;
    double e = -0.5 * z * z - psi(y);
    if (with_g) e += apriori.log_density(y) - log_gx;
    return std::exp(e);
  };
  const double inf = std::numeric_limits<double>::infinity();
  double err = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -inf, inf, 15, 1e-14, &err);
  return std::exp(psi(x)) * integral / std::sqrt(2.0 * M_PI);
}

RatioEstimate bridge_density_ratio(const Configuration& x, const DriftSpec& drift, const InteractionSpec& spec,
                                   const AprioriMeasure& apriori, const PathSampling& sampling,
                                   DensityReference reference) {
  const Box& region = x.box();
  const TimeGrid grid(sampling.t, sampling.steps);
  const double sd = std::sqrt(sampling.t);
  const bool apriori_factor = reference == DensityReference::Apriori;
  auto make_worker = [&]() {
    GridPath layout(grid, region.sites());
    RFunctional r(region, drift, spec, layout);
    return [&, r = std::move(r), y = Configuration(region)](std::size_t s, std::span<double> out) mutable {
      const SeedStream stream = sampling.stream(s);
      for (std::size_t c = 0; c < region.size(); ++c) {
        const Site site = region.site_at(c);
        const auto z = stream.normal_pair(kEndpointLaneBit | site_key(site), 0);
        y.values()[c] = x.values()[c] + sd * z[0];
      }
      const GridPath bridge = sample_bridge(y, x, grid, stream);
      double log_r = r.log_value(PathView(bridge));
      if (apriori_factor)
        for (std::size_t c = 0; c < region.size(); ++c)
          log_r += apriori.log_density(y.values()[c]) - apriori.log_density(x.values()[c]);
      const double value = guarded_exp(log_r, "R");
      out[0] = value;
      out[1] = std::abs(value - 1.0);
      out[2] = value <= 0.0 ? 1.0 : 0.0;
    };
  };
  const auto m = estimate_means(sampling.n_paths, 3, make_worker, sampling.execution);
  return RatioEstimate{m[0], m[1].mean, m[2].mean};
}

std::vector<KdePoint> direct_density_kde(const GibbsSpec& gibbs, const DriftSpec& drift,
                                         const std::vector<std::vector<double>>& probes, const KdeOptions& options) {
  if (!(options.bandwidth > 0.0)) throw DomainError("KDE bandwidth must be positive");
  const std::size_t dim = gibbs.box.size();
  if (dim > 2) throw DomainError("direct KDE supports at most 2 sites");
  for (const auto& p : probes)
    if (p.size() != dim) throw DomainError("probe dimension does not match the box");

  const SampleBatch initial = sample_gibbs(gibbs, options.n_samples, mix_tag(options.seed, kKdeInitialTag), options.sampler);
  std::vector<double> final_values(initial.values.size());
  const TimeGrid grid(options.t, options.steps);
  parallel_fill(
      options.n_samples,
      [&]() {
        return [&](std::size_t s) {
          const Configuration x0 = initial.configuration(s);
          const SeedStream stream{options.seed, derive_stream_index(kKdeDynamicsTag, s)};
          const GridPath path = euler_maruyama(x0, drift, grid, stream);
          const auto last = path.row(grid.steps());
          std::copy(last.begin(), last.end(), final_values.begin() + static_cast<std::ptrdiff_t>(s * dim));
        };
      },
      options.execution);

  const double h = options.bandwidth;
  const double norm = std::pow(h * std::sqrt(2.0 * M_PI), static_cast<double>(dim));
  auto kde = [&](const std::vector<double>& values, const std::vector<double>& point) {
    RunningMoments acc;
    for (std::size_t s = 0; s < options.n_samples; ++s) {
      double e = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double u = (values[s * dim + k] - point[k]) / h;
        e += 0.5 * u * u;
      }
      acc.add(std::exp(-e) / norm);
    }
    return acc.estimate();
  };
  std::vector<KdePoint> out;
  for (const auto& p : probes) {
    const auto f0 = kde(initial.values, p);
    const auto ft = kde(final_values, p);
    out.push_back(KdePoint{p, f0.mean, f0.std_error, ft.mean, ft.std_error});
  }
  return out;
}

}  // namespace gibbsflow
