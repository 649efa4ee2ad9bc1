#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gibbsflow/cluster.hpp"
#include "gibbsflow/errors.hpp"
#include "gibbsflow/gibbs.hpp"

using namespace gibbsflow;

namespace {

double gk_line(const std::function<double(double)>& f) {
  const double inf = std::numeric_limits<double>::infinity();
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-14);
}

double gaussian_pdf(double y) { return std::exp(-0.5 * y * y) / std::sqrt(2 * M_PI); }

GibbsSpec two_site_spec(double J, double lam) {
  return GibbsSpec{Box::chain(0, 1), stock_interaction(J, lam), AprioriMeasure::standard_gaussian(), std::nullopt};
}

// Connected polymer subsets by brute force over all subsets of a small vocabulary.
std::set<std::vector<std::size_t>> brute_clusters(const PolymerVocabulary& v, int max_polymers) {
  std::set<std::vector<std::size_t>> out;
  const std::size_t n = v.size();
  for (std::uint32_t subset = 1; subset < (1u << n); ++subset) {
    if (std::popcount(subset) > max_polymers) continue;
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < n; ++k)
      if (subset >> k & 1u) idx.push_back(k);
    std::uint32_t reached = 1u << idx[0], frontier = reached;
    while (frontier) {
      std::uint32_t next = 0;
      for (std::size_t a : idx)
        if (frontier >> a & 1u)
          for (std::size_t b : idx)
            if (!(reached >> b & 1u) && (v.polymers[a].mask & v.polymers[b].mask)) next |= 1u << b;
      reached |= next;
      frontier = next;
    }
    if (reached == subset) out.insert(idx);
  }
  return out;
}

// Truncated log of Z(lambda) = sum over families of clusters with disjoint supports of prod w lambda^{#polymers},
// where the clusters avoid `excluded` sites. Returns sum_{k<=cap} [lambda^k] log Z.
double brute_log_z(const std::vector<Cluster>& clusters, const std::vector<double>& w, int cap, std::uint64_t excluded) {
  std::vector<double> z(static_cast<std::size_t>(cap) + 1, 0.0);
  std::vector<std::size_t> usable;
  for (std::size_t c = 0; c < clusters.size(); ++c)
    if (!(clusters[c].mask & excluded) && static_cast<int>(clusters[c].count()) <= cap) usable.push_back(c);
  std::function<void(std::size_t, std::uint64_t, int, double)> walk = [&](std::size_t from, std::uint64_t used, int order,
                                                                          double prod) {
    z[static_cast<std::size_t>(order)] += prod;
    for (std::size_t q = from; q < usable.size(); ++q) {
      const auto& c = clusters[usable[q]];
      const int o = order + static_cast<int>(c.count());
      if (o > cap || (c.mask & used)) continue;
      walk(q + 1, used | c.mask, o, prod * w[usable[q]]);
    }
  };
  walk(0, 0, 0, 1.0);
  std::vector<double> l(z.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 1; k < z.size(); ++k) {
    double acc = z[k];
    for (std::size_t j = 1; j < k; ++j) acc -= static_cast<double>(j) / static_cast<double>(k) * l[j] * z[k - j];
    l[k] = acc;
    total += acc;
  }
  return total;
}

double weight_for(const Cluster& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i : c.polymers) h = (h ^ (i + 1)) * 1099511628211ull;
  return (static_cast<double>(h % 20001) / 10000.0 - 1.0) * 0.3;
}

}  // namespace

TEST_SUITE("gibbs_measure") {
  TEST_CASE("partition function of a decoupled volume factorizes") {
    const GibbsSpec spec{Box::chain(0, 2), stock_interaction(0.0, 0.8), AprioriMeasure::standard_gaussian(), std::nullopt};
    const double one = gk_line([](double y) { return std::exp(-0.8 * std::tanh(y * y)) * gaussian_pdf(y); });
    CHECK(partition_function_quadrature(spec) == doctest::Approx(std::pow(one, 3)).epsilon(1e-10));
  }

  TEST_CASE("two-site partition function against nested adaptive quadrature") {
    const auto spec = two_site_spec(0.7, 0.4);
    const double ref = gk_line([](double a) {
      return gaussian_pdf(a) * gk_line([a](double b) {
               return gaussian_pdf(b) * std::exp(-std::cos(a - b) * 0.7 - 0.4 * (std::tanh(a * a) + std::tanh(b * b)));
             });
    });
    CHECK(partition_function_quadrature(spec) == doctest::Approx(ref).epsilon(1e-9));
  }

  TEST_CASE("single-site kernel is normalized against m") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.5);
    const GibbsSpec spec{Box::chain(-1, 1), stock_interaction(0.9, 0.6), AprioriMeasure::standard_gaussian(), std::nullopt};
    for (int trial = 0; trial < 10; ++trial) {
      Configuration x(Box::chain(-2, 2));
      for (auto& v : x.values()) v = n(rng);
      const auto k = single_site_kernel(spec, Site{0}, x);
      CHECK(gk_line([&](double y) { return k(y) * gaussian_pdf(y); }) == doctest::Approx(1.0).epsilon(1e-8));
    }
  }

  TEST_CASE("Metropolis acceptance is the clipped density ratio") {
    const auto spec = two_site_spec(0.5, 0.5);
    const Configuration x(Box::chain(0, 1), std::vector<double>{0.3, -0.4});
    auto y = x;
    y.set(Site{0}, 1.1);
    const double ratio = std::exp(log_unnormalized_density(spec, y) - log_unnormalized_density(spec, x));
    CHECK(metropolis_acceptance(spec, x, Site{0}, 1.1) == doctest::Approx(std::min(1.0, ratio)).epsilon(1e-14));
  }

  TEST_CASE("two-site sampler marginal matches quadrature (KS <= 0.01 at 1e5 samples)") {
    const auto spec = two_site_spec(1.0, 0.5);
    const auto batch = sample_gibbs(spec, 100000, 31);
    CHECK(batch.count() == 100000);
    CHECK(batch.acceptance_rate > 0.2);
    const MarginalCdf cdf(spec, Site{0});
    CHECK(ks_distance(batch.marginal(Site{0}), [&](double y) { return cdf(y); }) <= 0.01);
    const MarginalCdf cdf1(spec, Site{1});
    CHECK(ks_distance(batch.marginal(Site{1}), [&](double y) { return cdf1(y); }) <= 0.01);
  }

  TEST_CASE("sampler is reproducible from its seed and persists to CSV") {
    const auto spec = two_site_spec(0.5, 0.5);
    SamplerOptions o;
    o.burn_in = 200;
    const auto a = sample_gibbs(spec, 50, 5, o);
    const auto b = sample_gibbs(spec, 50, 5, o);
    CHECK(a.values == b.values);
    CHECK(sample_gibbs(spec, 50, 6, o).values != a.values);
    const auto file = (std::filesystem::temp_directory_path() / "gibbsflow_samples.csv").string();
    write_samples_csv(file, a);
    std::ifstream in(file);
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "x(0),x(1)");
    CHECK(std::stod(first.substr(0, first.find(','))) == a.values[0]);
    std::filesystem::remove(file);
  }

  TEST_CASE("KS distance of a perfect grid is 1/(2n)") {
    std::vector<double> s;
    for (int k = 0; k < 100; ++k) s.push_back((k + 0.5) / 100.0);
    CHECK(ks_distance(s, [](double y) { return std::clamp(y, 0.0, 1.0); }) == doctest::Approx(0.005).epsilon(1e-12));
  }
}

TEST_SUITE("cluster_engine") {
  TEST_CASE("vocabulary of the stock 3-chain with tanh drift") {
    const auto v = build_polymer_vocabulary(Box::chain(-1, 1), markov_tanh_drift(0.1), stock_interaction(0.1, 0.1));
    // singles x3, nearest-neighbor pairs x2, drift block {-1,0,1}.
    CHECK(v.size() == 6);
    CHECK(std::count_if(v.polymers.begin(), v.polymers.end(), [](const Polymer& p) { return p.has_drift(); }) == 1);
    CHECK(compute_p(v) == 5);
    const auto z = build_polymer_vocabulary(Box::chain(-1, 1), zero_drift(), zero_interaction());
    CHECK(z.empty());
  }

  TEST_CASE("merged polymer when a drift block coincides with an interaction support") {
    const auto v = build_polymer_vocabulary(Box::chain(0, 0), constant_drift(0.5), cos_single_interaction(0.3));
    REQUIRE(v.size() == 1);
    CHECK(v.polymers[0].kind == PolymerKind::Merged);
  }

  TEST_CASE("enumeration equals the brute-force connected subsets") {
    const auto v = build_polymer_vocabulary(Box::chain(0, 3), markov_tanh_drift(0.1), stock_interaction(0.1, 0.1, 2));
    REQUIRE(v.size() <= 20);
    for (int cap : {1, 2, 3, 4}) {
      const auto clusters = enumerate_clusters(v, std::nullopt, cap);
      std::set<std::vector<std::size_t>> got;
      for (const auto& c : clusters) got.insert(c.polymers);
      CHECK(got.size() == clusters.size());
      CHECK(got == brute_clusters(v, cap));
    }
    CHECK_THROWS_AS(enumerate_clusters(v, std::nullopt, 4, 10), NumericalGuardError);
    for (const auto& c : enumerate_clusters(v, Site{0}, 3)) CHECK((c.mask & v.mask_of({Site{0}})) != 0);
  }

  TEST_CASE("graph sums and Ursell coefficients") {
    // Complete graph K_n: (-1)^{n-1} (n-1)!; path graph: (-1)^{n-1}.
    long long fact = 1;
    for (int n = 1; n <= 7; ++n) {
      if (n > 1) fact *= n - 1;
      std::vector<std::uint32_t> complete(n), path(n, 0);
      for (int a = 0; a < n; ++a) {
        complete[a] = ((1u << n) - 1) & ~(1u << a);
        if (a > 0) path[a] |= 1u << (a - 1);
        if (a + 1 < n) path[a] |= 1u << (a + 1);
      }
      CHECK(connected_graph_sum(n, complete) == ((n % 2) ? fact : -fact));
      CHECK(connected_graph_sum(n, path) == ((n % 2) ? 1 : -1));
    }
    Cluster a{{0}, 0b011}, b{{1}, 0b110}, c{{2}, 0b1000};
    CHECK(ursell_coefficient(std::vector<Cluster>{a}) == boost::rational<long long>(1));
    CHECK(ursell_coefficient(std::vector<Cluster>{a, b}) == boost::rational<long long>(-1, 2));
    CHECK(ursell_coefficient(std::vector<Cluster>{a, c}) == boost::rational<long long>(0));
    CHECK(ursell_coefficient(std::vector<Cluster>{a, a}) == boost::rational<long long>(-1, 2));
    CHECK(ursell_coefficient(std::vector<Cluster>{a, b, a}) == ursell_coefficient(std::vector<Cluster>{b, a, a}));
    CHECK(ursell_coefficient(std::vector<Cluster>{a, a, a}) == boost::rational<long long>(1, 3));
  }

  TEST_CASE("two-polymer log expansion: log(1 + w1 + w2) with overlapping polymers") {
    // Vocabulary {A, B}, A and B overlap: clusters A, B, AB; Z = 1 + wA + wB + wAB.
    const auto v = build_polymer_vocabulary(Box::chain(0, 1), zero_drift(), stock_interaction(0.1, 0.0));
    REQUIRE(v.size() == 1);
    const auto v2 = build_polymer_vocabulary(Box::chain(0, 1), zero_drift(), stock_interaction(0.1, 0.1));
    REQUIRE(v2.size() == 3);
    for (int cap : {1, 2, 3, 4, 5}) {
      const auto plan = make_series_plan(v2, cap);
      std::vector<double> w;
      for (const auto& c : plan.clusters) w.push_back(weight_for(c));
      CHECK(series_value(plan, w) == doctest::Approx(brute_log_z(plan.clusters, w, cap, 0)).epsilon(1e-12));
    }
  }

  TEST_CASE("series plan equals the truncated log of the cluster partition function") {
    const auto v = build_polymer_vocabulary(Box::chain(-1, 1), markov_tanh_drift(0.1), stock_interaction(0.1, 0.1));
    for (int cap : {1, 2, 3, 4}) {
      const auto plan = make_series_plan(v, cap);
      std::vector<double> w;
      for (const auto& c : plan.clusters) w.push_back(weight_for(c));
      CHECK(series_value(plan, w) == doctest::Approx(brute_log_z(plan.clusters, w, cap, 0)).epsilon(1e-12));
      // Anchored plan: full log minus the log over clusters avoiding the anchor.
      const auto anchored = make_series_plan(v, cap, Site{1});
      std::vector<double> wa;
      for (const auto& c : anchored.clusters) wa.push_back(weight_for(c));
      const double expect = brute_log_z(plan.clusters, w, cap, 0) - brute_log_z(plan.clusters, w, cap, v.mask_of({Site{1}}));
      CHECK(series_value(anchored, wa) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("series gradient matches finite differences") {
    const auto v = build_polymer_vocabulary(Box::chain(-1, 1), markov_tanh_drift(0.1), stock_interaction(0.1, 0.1));
    const auto plan = make_series_plan(v, 3);
    std::vector<double> w;
    for (const auto& c : plan.clusters) w.push_back(weight_for(c));
    const auto g = series_gradient(plan, w);
    for (std::size_t k = 0; k < w.size(); k += 3) {
      auto up = w, dn = w;
      up[k] += 1e-6;
      dn[k] -= 1e-6;
      CHECK(g[k] == doctest::Approx((series_value(plan, up) - series_value(plan, dn)) / 2e-6).epsilon(1e-6));
    }
  }

  TEST_CASE("far-apart sites factorize") {
    const auto spec = cos_single_interaction(0.4);
    const auto both = build_polymer_vocabulary(SiteSet{Site{0}, Site{10}}, zero_drift(), spec);
    const auto left = build_polymer_vocabulary(SiteSet{Site{0}}, zero_drift(), spec);
    const auto right = build_polymer_vocabulary(SiteSet{Site{10}}, zero_drift(), spec);
    auto value = [](const PolymerVocabulary& v) {
      const auto plan = make_series_plan(v, 4);
      std::vector<double> w;
      // Weight keyed by the support so both vocabularies agree.
      for (const auto& c : plan.clusters) w.push_back(v.sites_of(c.mask).front() == Site{0} ? 0.21 : -0.13);
      for (const auto& t : plan.terms) {
        std::uint64_t m = 0;
        for (std::size_t c : t.clusters) m |= plan.clusters[c].mask;
        CHECK(std::popcount(m) == 1);
      }
      return series_value(plan, w);
    };
    CHECK(value(both) == doctest::Approx(value(left) + value(right)).epsilon(1e-14));
    CHECK(value(left) == doctest::Approx(0.21 - 0.21 * 0.21 / 2 + 0.21 * 0.21 * 0.21 / 3 - std::pow(0.21, 4) / 4).epsilon(1e-14));
  }

  TEST_CASE("psi with zero drift is the interaction increment") {
    const auto v = build_polymer_vocabulary(Box::chain(0, 1), zero_drift(), stock_interaction(0.5, 0.3));
    const auto x = Configuration(Box::chain(0, 1), std::vector<double>{0.2, -0.5});
    const auto p = sample_brownian(x, TimeGrid(0.1, 8), SeedStream{1, 1});
    for (const auto& poly : v.polymers) {
      std::vector<double> at0, att;
      for (const auto& s : poly.support) {
        at0.push_back(p(0, p.column(s)));
        att.push_back(p(8, p.column(s)));
      }
      const auto spec = stock_interaction(0.5, 0.3);
      CHECK(psi_eval(poly, p, zero_drift(), spec) ==
            doctest::Approx(spec.potential(poly.support, att) - spec.potential(poly.support, at0)).epsilon(1e-14));
    }
  }
}
