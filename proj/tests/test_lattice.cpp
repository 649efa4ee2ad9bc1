#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/lattice.hpp"

using namespace gibbsflow;

namespace {

// Brute force: every subset of the r-expanded box with 1 or 2 sites, diameter <= r, meeting the region.
std::vector<SiteSet> scan_supports(const Box& region, int r, Metric metric) {
  const auto cand = region.expanded(r).sites();
  std::vector<SiteSet> out;
  for (std::size_t a = 0; a < cand.size(); ++a) {
    if (region.contains(cand[a])) out.push_back({cand[a]});
    if (r == 0) continue;
    for (std::size_t b = a + 1; b < cand.size(); ++b) {
      SiteSet s = make_site_set({cand[a], cand[b]});
      if (diameter(s, metric) > r) continue;
      if (region.contains(s[0]) || region.contains(s[1])) out.push_back(s);
    }
  }
  std::sort(out.begin(), out.end(), support_less);
  return out;
}

Configuration random_config(const Box& box, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.5);
  Configuration c(box);
  for (auto& v : c.values()) v = n(rng);
  return c;
}

// Independent Hamiltonian: loop over all site pairs of the collar box.
double brute_hamiltonian(const Box& region, const Configuration& x, const Configuration& z, double J, double lam, int r) {
  auto value = [&](const Site& s) { return region.contains(s) ? x.at(s) : z.at(s); };
  double h = 0.0;
  for (const auto& s : region.sites()) h += lam * std::tanh(value(s) * value(s));
  const auto all = region.expanded(r).sites();
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      if (!region.contains(all[a]) && !region.contains(all[b])) continue;
      if (distance(all[a], all[b], Metric::Linf) > r) continue;
      h += J * std::cos(value(all[a]) - value(all[b]));
    }
  return h;
}

}  // namespace

TEST_SUITE("lattice_model") {
  TEST_CASE("site ordering, arithmetic and labels") {
    CHECK(Site{1, -2}.to_string() == "1;-2");
    CHECK(Site{-1} < Site{0});
    CHECK(Site{0, 5} < Site{1, -5});
    CHECK(Site{1, 2} + Site{-1, 3} == Site{0, 5});
    CHECK(distance(Site{0, 0}, Site{1, 1}, Metric::L1) == 2);
    CHECK(distance(Site{0, 0}, Site{1, 1}, Metric::Linf) == 1);
  }

  TEST_CASE("box indexing round-trips") {
    const Box b(Site{-1, 0}, Site{1, 2});
    CHECK(b.size() == 9);
    for (std::size_t k = 0; k < b.size(); ++k) CHECK(b.index_of(b.site_at(k)) == k);
    const auto sites = b.sites();
    CHECK(std::is_sorted(sites.begin(), sites.end()));
  }

  TEST_CASE("supports_touching examples") {
    const Box origin = Box::chain(0, 0);
    CHECK(supports_touching(origin, stock_interaction(1.0, 1.0, 0)) == std::vector<SiteSet>{{Site{0}}});
    const std::vector<SiteSet> expect{{Site{0}}, {Site{-1}, Site{0}}, {Site{0}, Site{1}}};
    CHECK(supports_touching(origin, stock_interaction(1.0, 1.0, 1)) == expect);

    const Box o2(Site{0, 0}, Site{0, 0});
    const auto l1 = supports_touching(o2, stock_interaction(1.0, 1.0, 1, Metric::L1));
    CHECK(std::count_if(l1.begin(), l1.end(), [](const SiteSet& s) { return s.size() == 1; }) == 1);
    CHECK(std::count_if(l1.begin(), l1.end(), [](const SiteSet& s) { return s.size() == 2; }) == 4);
    const auto linf = supports_touching(o2, stock_interaction(1.0, 1.0, 1, Metric::Linf));
    CHECK(std::count_if(linf.begin(), linf.end(), [](const SiteSet& s) { return s.size() == 2; }) == 8);
  }

  TEST_CASE("supports_touching matches a subset scan") {
    for (Metric metric : {Metric::L1, Metric::Linf})
      for (int r : {0, 1, 2}) {
        const Box b(Site{-1, 0}, Site{1, 1});
        CHECK(supports_touching(b, stock_interaction(1.0, 1.0, r, metric)) == scan_supports(b, r, metric));
      }
  }

  TEST_CASE("hamiltonian examples") {
    const Box region = Box::chain(0, 0);
    const Configuration x(region, 0.0);
    const Configuration z(Box::chain(-3, 3), 0.0);
    CHECK(hamiltonian(region, x, z, zero_interaction()) == 0.0);
    CHECK(hamiltonian(region, x, z, cos_pair_interaction(1.0)) == doctest::Approx(2.0).epsilon(1e-15));
  }

  TEST_CASE("hamiltonian on a 5-site chain matches brute force; locality; translation") {
    std::mt19937_64 rng(7);
    const Box region = Box::chain(-2, 2);
    for (int r : {1, 2}) {
      const auto spec = stock_interaction(0.7, 0.4, r);
      for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_config(region, rng);
        auto z = random_config(Box::chain(-6, 6), rng);
        const double h = hamiltonian(region, x, z, spec);
        CHECK(h == doctest::Approx(brute_hamiltonian(region, x, z, 0.7, 0.4, r)).epsilon(1e-12));
        // Locality: sites farther than r do not matter.
        auto z2 = z;
        z2.set(Site{2 + r + 1}, 123.0);
        z2.set(Site{-2 - r - 1}, -77.0);
        CHECK(hamiltonian(region, x, z2, spec) == h);
        // Translation covariance.
        const Site shift{3};
        CHECK(hamiltonian(region.translated(shift), x.translated(shift), z.translated(shift), spec) ==
              doctest::Approx(h).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("missing boundary site is a hard error") {
    const Box region = Box::chain(0, 0);
    CHECK_THROWS_AS(hamiltonian(region, Configuration(region), Configuration(Box::chain(0, 1)), cos_pair_interaction(1.0)),
                    MissingSiteError);
  }

  TEST_CASE("free_energy_sum") {
    CHECK(free_energy_sum(Box::chain(0, 3), Configuration(Box::chain(0, 3), 0.3), zero_interaction()) == 0.0);
    const auto spec = stock_interaction(1.0, 0.5);
    const Box two = Box::chain(0, 1);
    const double a = 0.8;
    CHECK(free_energy_sum(two, Configuration(two, a), spec) == doctest::Approx(1.0 + 2.0 * 0.5 * std::tanh(a * a)));
    // 4-site chain against an explicit subset scan.
    std::mt19937_64 rng(3);
    const Box four = Box::chain(0, 3);
    const auto x = random_config(four, rng);
    double brute = 0.0;
    const auto s = four.sites();
    for (unsigned mask = 1; mask < 16; ++mask) {
      std::vector<Site> sub;
      for (int k = 0; k < 4; ++k)
        if (mask >> k & 1u) sub.push_back(s[static_cast<std::size_t>(k)]);
      if (sub.size() == 1) brute += 0.5 * std::tanh(x.at(sub[0]) * x.at(sub[0]));
      if (sub.size() == 2 && distance(sub[0], sub[1], Metric::Linf) <= 1) brute += std::cos(x.at(sub[0]) - x.at(sub[1]));
    }
    CHECK(free_energy_sum(four, x, spec) == doctest::Approx(brute).epsilon(1e-13));
  }

  TEST_CASE("declared bounds of the stock interaction hold") {
    const auto spec = stock_interaction(0.6, 0.9);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    const SiteSet pair{Site{0}, Site{1}};
    const SiteSet single{Site{0}};
    for (int k = 0; k < 2000; ++k) {
      const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
      const std::array<double, 2> v1{a, b}, v2{c, d};
      CHECK(std::abs(spec.potential(pair, v1)) <= spec.sup_norm + 1e-15);
      CHECK(std::abs(spec.potential(single, std::span(v1.data(), 1))) <= spec.sup_norm + 1e-15);
      const double lip = std::max(std::abs(a - c), std::abs(b - d));
      CHECK(std::abs(spec.potential(pair, v1) - spec.potential(pair, v2)) <= spec.lipschitz * lip + 1e-12);
      CHECK(std::abs(spec.potential(single, std::span(v1.data(), 1)) - spec.potential(single, std::span(v2.data(), 1))) <=
            spec.lipschitz * std::abs(a - c) + 1e-12);
    }
  }

  TEST_CASE("single-site Lipschitz bound of h_i") {
    const auto spec = stock_interaction(0.5, 0.5);
    std::mt19937_64 rng(5);
    const Box i = Box::chain(0, 0);
    const double n_supports = static_cast<double>(supports_touching(i, spec).size());
    for (int trial = 0; trial < 200; ++trial) {
      const auto z = random_config(Box::chain(-2, 2), rng);
      const auto x = random_config(i, rng);
      const auto y = random_config(i, rng);
      const double diff = std::abs(x.values()[0] - y.values()[0]);
      CHECK(std::abs(hamiltonian(i, x, z, spec) - hamiltonian(i, y, z, spec)) <= spec.lipschitz * n_supports * diff + 1e-12);
    }
  }

  TEST_CASE("concatenation agrees with x inside and z outside") {
    const Configuration inner(Box::chain(0, 1), std::vector<double>{1.0, 2.0});
    const Configuration outer(Box::chain(-2, 3), 9.0);
    const auto c = Configuration::concat(inner, outer);
    CHECK(c.at(Site{0}) == 1.0);
    CHECK(c.at(Site{1}) == 2.0);
    CHECK(c.at(Site{-2}) == 9.0);
    CHECK(c.at(Site{3}) == 9.0);
  }

  TEST_CASE("a priori measure from a log density is normalized numerically") {
    const auto m = AprioriMeasure::from_log_density("quartic", [](double x) { return -x * x * x * x; });
    // int exp(-x^4) dx = 2 Gamma(5/4).
    CHECK(m.normalization == doctest::Approx(2.0 * std::tgamma(1.25)).epsilon(1e-10));
  }
}
