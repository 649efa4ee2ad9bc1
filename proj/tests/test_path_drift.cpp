#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gibbsflow/drift.hpp"
#include "gibbsflow/errors.hpp"
#include "gibbsflow/path.hpp"

using namespace gibbsflow;

namespace {

SeedStream stream_for(std::uint64_t s) { return SeedStream{2024, s}; }

Configuration chain_config(int lo, int hi, double v) { return Configuration(Box::chain(lo, hi), v); }

// Direct double sum: sum_j b(s_{j-1}) dX_j with b(s_j) = sum_{1<=k<j} eps(s_k) dt (X(s_k) - X(0)).
double longmem_double_sum(double eps0, double power, const GridPath& p, std::size_t col) {
  const int m = p.steps();
  const double dt = p.grid().dt();
  double acc = 0.0;
  for (int j = 1; j <= m; ++j) {
    double b = 0.0;
    for (int k = 1; k <= j - 2; ++k) {
      const double s = p.grid().time(k);
      b += eps0 * std::pow(s, power) * dt * (p(k, col) - p(0, col));
    }
    acc += b * (p(j, col) - p(j - 1, col));
  }
  return acc;
}

}  // namespace

TEST_SUITE("path_engine") {
  TEST_CASE("time grid endpoint is exact") {
    const TimeGrid g(0.1, 3);
    CHECK(g.time(3) == 0.1);
    CHECK(g.time(0) == 0.0);
    CHECK_THROWS_AS(TimeGrid(0.0, 4), DomainError);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), DomainError);
  }

  TEST_CASE("Brownian paths: start, moments and per-site independence") {
    const TimeGrid g(0.5, 16);
    const auto x0 = chain_config(0, 1, 0.7);
    RunningMoments end0, end_sq, cross, mid;
    for (std::uint64_t s = 0; s < 40000; ++s) {
      const auto p = sample_brownian(x0, g, stream_for(s));
      CHECK(p(0, 0) == 0.7);
      const double a = p(16, 0) - 0.7, b = p(16, 1) - 0.7;
      end0.add(a);
      end_sq.add(a * a);
      cross.add(a * b);
      mid.add((p(8, 0) - 0.7) * a);
    }
    CHECK(std::abs(end0.estimate().mean) < 4 * end0.estimate().std_error);
    CHECK(std::abs(end_sq.estimate().mean - 0.5) < 4 * end_sq.estimate().std_error);
    CHECK(std::abs(cross.estimate().mean) < 4 * cross.estimate().std_error);
    // Cov(B(t/2), B(t)) = t/2.
    CHECK(std::abs(mid.estimate().mean - 0.25) < 4 * mid.estimate().std_error);
  }

  TEST_CASE("site-keyed noise does not depend on the other simulated sites") {
    const TimeGrid g(0.2, 10);
    const auto small = sample_brownian(chain_config(0, 0, 0.0), g, stream_for(3));
    const auto large = sample_brownian(chain_config(-2, 2, 0.0), g, stream_for(3));
    const std::size_t c = large.column(Site{0});
    for (int j = 0; j <= 10; ++j) CHECK(small(j, 0) == large(j, c));
  }

  TEST_CASE("bridge endpoints and midpoint variance") {
    const TimeGrid g(0.4, 8);
    const auto x0 = chain_config(0, 0, -1.0);
    const auto x1 = chain_config(0, 0, 2.0);
    RunningMoments mean_mid, var_mid;
    for (std::uint64_t s = 0; s < 40000; ++s) {
      const auto p = sample_bridge(x0, x1, g, stream_for(s));
      REQUIRE(p(0, 0) == -1.0);
      REQUIRE(p(8, 0) == 2.0);
      const double dev = p(4, 0) - 0.5;
      mean_mid.add(dev);
      var_mid.add(dev * dev);
    }
    CHECK(std::abs(mean_mid.estimate().mean) < 4 * mean_mid.estimate().std_error);
    CHECK(std::abs(var_mid.estimate().mean - 0.1) < 4 * var_mid.estimate().std_error);
  }

  TEST_CASE("Euler-Maruyama: zero drift is bitwise Brownian, constant drift shifts linearly") {
    const TimeGrid g(0.3, 20);
    const auto x0 = chain_config(-1, 1, 0.2);
    const auto bm = sample_brownian(x0, g, stream_for(9));
    CHECK(euler_maruyama(x0, zero_drift(), g, stream_for(9)) == bm);
    const auto em = euler_maruyama(x0, constant_drift(1.5), g, stream_for(9));
    for (int j = 0; j <= 20; ++j)
      for (std::size_t c = 0; c < 3; ++c) CHECK(em(j, c) - bm(j, c) == doctest::Approx(1.5 * g.time(j)).epsilon(1e-12));
  }

  TEST_CASE("Euler-Maruyama: sites with a truncated neighborhood are plain Brownian") {
    const TimeGrid g(0.3, 20);
    const auto x0 = chain_config(-1, 1, 0.4);
    const auto bm = sample_brownian(x0, g, stream_for(1));
    const auto em = euler_maruyama(x0, markov_tanh_drift(0.8), g, stream_for(1));
    for (int j = 0; j <= 20; ++j) {
      CHECK(em(j, 0) == bm(j, 0));
      CHECK(em(j, 2) == bm(j, 2));
    }
    double diff = 0.0;
    for (int j = 0; j <= 20; ++j) diff += std::abs(em(j, 1) - bm(j, 1));
    CHECK(diff > 0.0);
  }

  TEST_CASE("reversal is an involution and the binary dump round-trips") {
    const auto p = sample_brownian(chain_config(0, 2, 0.1), TimeGrid(0.25, 7), stream_for(4));
    CHECK(reverse_path(reverse_path(p)) == p);
    const auto r = reverse_path(p);
    for (int j = 0; j <= 7; ++j) CHECK(r(j, 1) == p(7 - j, 1));
    const auto file = (std::filesystem::temp_directory_path() / "gibbsflow_path_test.bin").string();
    write_path_binary(file, p, 77);
    std::uint64_t seed = 0;
    CHECK(read_path_binary(file, &seed) == p);
    CHECK(seed == 77);
    std::filesystem::remove(file);
  }

  TEST_CASE("missing site lookups throw") {
    const GridPath p(TimeGrid(1.0, 2), {Site{0}});
    CHECK_THROWS_AS(p.column(Site{1}), MissingSiteError);
    CHECK_THROWS_AS(bind_drift(markov_tanh_drift(1.0), Site{0}, p), MissingSiteError);
  }
}

TEST_SUITE("drift_girsanov") {
  TEST_CASE("drift is non-anticipative and the incremental sequence matches pointwise evaluation") {
    const TimeGrid g(0.2, 24);
    const auto x0 = chain_config(-1, 1, 0.3);
    const std::vector<DriftSpec> drifts{markov_tanh_drift(0.9), long_memory_drift(0.7),
                                        spacetime_kernel_drift(0.8, lebesgue_integrator()),
                                        spacetime_kernel_drift(0.8, two_jump_integrator(0.05, 0.4, 0.13, -0.3))};
    for (const auto& d : drifts) {
      auto p = sample_brownian(x0, g, stream_for(5));
      const auto binding = bind_drift(d, Site{0}, p);
      std::vector<double> seq(24);
      drift_sequence(binding, PathView(p), seq);
      for (int j = 0; j < 24; ++j) CHECK(seq[static_cast<std::size_t>(j)] == eval_drift(binding, j, PathView(p)));
      const double before = eval_drift(d, Site{0}, 10, p);
      auto q = p;
      for (int j = 11; j <= 24; ++j)
        for (std::size_t c = 0; c < 3; ++c) q(j, c) += 5.0;
      CHECK(eval_drift(d, Site{0}, 10, q) == before);
    }
  }

  TEST_CASE("Girsanov functional for a constant drift") {
    const TimeGrid g(0.4, 50);
    const auto p = sample_brownian(chain_config(0, 0, 1.0), g, stream_for(2));
    const auto f = girsanov_F(constant_drift(0.6), Site{0}, p);
    CHECK(f.ito == doctest::Approx(0.6 * (p(50, 0) - 1.0)).epsilon(1e-13));
    CHECK(f.quad == doctest::Approx(0.36 * 0.4).epsilon(1e-13));
    CHECK(f.value == doctest::Approx(f.ito - f.quad / 2).epsilon(1e-15));
  }

  TEST_CASE("exp(F) has unit mean under Brownian paths") {
    const TimeGrid g(0.3, 30);
    const auto x0 = chain_config(-1, 1, 0.0);
    for (const auto& d : {markov_tanh_drift(1.0), long_memory_const_drift(2.0)}) {
      RunningMoments m;
      for (std::uint64_t s = 0; s < 30000; ++s) {
        const auto p = sample_brownian(x0, g, stream_for(s));
        m.add(std::exp(girsanov_F(d, Site{0}, p).value));
      }
      CHECK(std::abs(m.estimate().mean - 1.0) < 4 * m.estimate().std_error);
    }
  }

  TEST_CASE("zero drift gives zero reversed functional") {
    const auto p = sample_brownian(chain_config(-1, 1, 0.5), TimeGrid(0.1, 10), stream_for(0));
    CHECK(reversed_F(zero_drift(), Site{0}, p) == 0.0);
  }

  TEST_CASE("reversal closed form: exact for constant drift, convergent for tanh drift") {
    const TimeGrid g(0.1, 64);
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto p = sample_brownian(chain_config(-1, 1, 0.2), g, stream_for(s));
      const auto c = constant_drift(-0.8);
      CHECK(std::abs(markov_reversed_closed_form(c, Site{0}, p) - reversed_F(c, Site{0}, p)) <= 1e-12);
    }
    auto mean_gap = [](int m) {
      double acc = 0.0;
      const auto d = markov_tanh_drift(1.0);
      for (std::uint64_t s = 0; s < 100; ++s) {
        const auto p = sample_brownian(chain_config(-1, 1, 0.0), TimeGrid(0.1, m), stream_for(s));
        acc += std::abs(markov_reversed_closed_form(d, Site{0}, p) - reversed_F(d, Site{0}, p));
      }
      return acc / 100.0;
    };
    const double coarse = mean_gap(64), fine = mean_gap(1024);
    CHECK(fine < coarse);
    CHECK(fine < 0.05);
  }

  TEST_CASE("backward sum identity -B = L - 2S") {
    const auto d = markov_tanh_drift(0.7);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto p = sample_brownian(chain_config(-1, 1, 0.0), TimeGrid(0.1, 128), stream_for(s));
      const auto parts = markov_reversal_parts(d, Site{0}, p);
      CHECK(std::abs(-parts.backward - (parts.ito - 2.0 * parts.stratonovich)) <= 1e-12);
    }
  }

  TEST_CASE("long-memory Fubini single sum equals the double sum") {
    for (std::uint64_t s = 0; s < 200; ++s) {
      const auto p = sample_brownian(chain_config(0, 0, 0.3), TimeGrid(0.2, 40), stream_for(s));
      const auto d = long_memory_drift(1.3);
      const double fubini = longmem_J_fubini(d, Site{0}, p);
      CHECK(std::abs(fubini - ito_integral(d, Site{0}, p)) <= 1e-12);
      CHECK(std::abs(fubini - longmem_double_sum(1.3, -0.25, p, 0)) <= 1e-12);
    }
  }

  TEST_CASE("gaussian_abs_mgf matches quadrature") {
    for (double a : {0.0, 0.5, 1.0, 2.0, 3.0}) {
      auto f = [a](double z) { return std::exp(a * std::abs(z) - 0.5 * z * z) / std::sqrt(2 * M_PI); };
      const double ref = 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                                   f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-15);
      CHECK(std::abs(gaussian_abs_mgf(a) - ref) <= 1e-10 * std::max(1.0, ref));
    }
  }

  TEST_CASE("a3 moment estimate: zero drift vanishes; invalid exponent rejected") {
    const auto x = chain_config(-1, 1, 0.0);
    CHECK(a3_moment_estimate(zero_drift(), x, 0.1, 10, 1000, 3, 1, 2).mean == 0.0);
    CHECK_THROWS_AS(a3_moment_estimate(markov_tanh_drift(1.0), x, 0.1, 10, 1000, 2, 1, 2), DomainError);
    const auto small = a3_moment_estimate(markov_tanh_drift(1.0), x, 0.025, 16, 20000, 3, 1, 2);
    const auto large = a3_moment_estimate(markov_tanh_drift(1.0), x, 0.2, 16, 20000, 3, 1, 2);
    CHECK(small.mean < large.mean);
  }

  TEST_CASE("Lipschitz constants") {
    CHECK(markov_tanh_drift(0.5).lipschitz(1.0) == doctest::Approx(2.0));
    CHECK(long_memory_const_drift(2.0).lipschitz(0.5) == doctest::Approx(2.0));
  }
}
