#include "gibbsflow/drift.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

std::string to_string(DriftFamily family) {
  switch (family) {
    case DriftFamily::Markovian: return "markovian";
    case DriftFamily::LongMemory: return "long_memory";
    case DriftFamily::SpaceTimeKernel: return "spacetime_kernel";
  }
  return "unknown";
}

std::size_t DriftSpec::origin_index() const {
  const Site zero = Site::origin(dim());
  const auto it = std::find(neighborhood.begin(), neighborhood.end(), zero);
  if (it == neighborhood.end()) throw DomainError("drift neighborhood must contain the origin");
  return static_cast<std::size_t>(it - neighborhood.begin());
}

SiteSet DriftSpec::block(const Site& i) const { return translate(neighborhood, i); }

double DriftSpec::lipschitz(double t) const {
  if (zero) return 0.0;
  switch (family) {
    case DriftFamily::Markovian: return std::get<MarkovianDrift>(params).lipschitz;
    case DriftFamily::LongMemory: return 2.0 * std::get<LongMemoryDrift>(params).memory_primitive(t);
    case DriftFamily::SpaceTimeKernel: {
      const auto& k = std::get<SpaceTimeKernelDrift>(params);
      return 2.0 * k.alpha_lipschitz * k.integrator.variation(t);
    }
  }
  return 0.0;
}

namespace {

std::vector<Site> chain_neighborhood() { return {Site{-1}, Site{0}, Site{1}}; }

DriftSpec markovian(std::string name, std::vector<Site> nbhd, MarkovianDrift params) {
  DriftSpec spec;
  spec.name = std::move(name);
  spec.family = DriftFamily::Markovian;
  spec.neighborhood = make_site_set(std::move(nbhd));
  spec.params = std::move(params);
  return spec;
}

}  // namespace

DriftSpec constant_drift(double c, int dim) {
  MarkovianDrift p;
  p.b0 = [c](double, std::span<const double>) { return c; };
  p.b0_prime = [](double, std::span<const double>) { return 0.0; };
  p.bound = std::abs(c);
  return markovian(c == 0.0 ? "zero" : fmt::format("constant({})", c), {Site::origin(dim)}, std::move(p));
}

DriftSpec zero_drift(int dim) {
  DriftSpec spec = constant_drift(0.0, dim);
  spec.zero = true;
  return spec;
}

DriftSpec markov_tanh_drift(double beta) {
  MarkovianDrift p;
  p.b0 = [beta](double, std::span<const double> x) { return beta * std::tanh(x[0] + x[2] - 2.0 * x[1]); };
  p.b0_prime = [beta](double, std::span<const double> x) {
    const double c = std::cosh(x[0] + x[2] - 2.0 * x[1]);
    return -2.0 * beta / (c * c);
  };
  p.bound = std::abs(beta);
  p.prime_bound = 2.0 * std::abs(beta);
  p.lipschitz = 4.0 * std::abs(beta);
  auto spec = markovian(fmt::format("markov_tanh({})", beta), chain_neighborhood(), std::move(p));
  spec.zero = beta == 0.0;
  return spec;
}

DriftSpec linear_clipped_drift(double slope, double bound) {
  MarkovianDrift p;
  p.b0 = [slope](double, std::span<const double> x) { return slope * x[0]; };
  p.b0_prime = [slope, bound](double, std::span<const double> x) {
    return std::abs(slope * x[0]) < bound ? slope : 0.0;
  };
  p.bound = bound;
  p.prime_bound = std::abs(slope);
  p.lipschitz = std::abs(slope);
  return markovian(fmt::format("linear_clipped({},{})", slope, bound), {Site{0}}, std::move(p));
}

DriftSpec long_memory_drift(double eps0) {
  DriftSpec spec;
  spec.name = fmt::format("long_memory({})", eps0);
  spec.family = DriftFamily::LongMemory;
  spec.neighborhood = {Site{0}};
  LongMemoryDrift p;
  p.memory = [eps0](double s) { return eps0 * std::pow(s, -0.25); };
  p.memory_primitive = [eps0](double t) { return std::abs(eps0) * (4.0 / 3.0) * std::pow(t, 0.75); };
  spec.params = std::move(p);
  spec.zero = eps0 == 0.0;
  return spec;
}

DriftSpec long_memory_const_drift(double eps0) {
  DriftSpec spec;
  spec.name = fmt::format("long_memory_const({})", eps0);
  spec.family = DriftFamily::LongMemory;
  spec.neighborhood = {Site{0}};
  LongMemoryDrift p;
  p.memory = [eps0](double) { return eps0; };
  p.memory_primitive = [eps0](double t) { return std::abs(eps0) * t; };
  spec.params = std::move(p);
  spec.zero = eps0 == 0.0;
  return spec;
}

DriftSpec spacetime_kernel_drift(double kappa, Integrator integrator) {
  DriftSpec spec;
  spec.name = fmt::format("spacetime_kernel({},{})", kappa, integrator.name);
  spec.family = DriftFamily::SpaceTimeKernel;
  spec.neighborhood = chain_neighborhood();
  SpaceTimeKernelDrift p;
  p.alpha0 = [kappa](double lag, std::span<const double> a) {
    return kappa * std::exp(-lag) * std::tanh(a[0] + a[2] - 2.0 * a[1]);
  };
  p.alpha_lipschitz = 4.0 * std::abs(kappa);
  p.integrator = std::move(integrator);
  spec.params = std::move(p);
  spec.zero = kappa == 0.0;
  return spec;
}

Integrator lebesgue_integrator() {
  return {"lebesgue", [](double s) { return s; }, [](double s) { return s; }};
}

Integrator two_jump_integrator(double u1, double h1, double u2, double h2) {
  Integrator v;
  v.name = fmt::format("two_jump({},{},{},{})", u1, h1, u2, h2);
  v.value = [=](double s) { return (s >= u1 ? h1 : 0.0) + (s >= u2 ? h2 : 0.0); };
  v.variation = [=](double s) { return (s >= u1 ? std::abs(h1) : 0.0) + (s >= u2 ? std::abs(h2) : 0.0); };
  return v;
}

DriftBinding bind_drift(const DriftSpec& spec, const Site& i, const GridPath& path) {
  DriftBinding b;
  b.spec = &spec;
  b.site = i;
  for (const auto& s : spec.block(i)) b.columns.push_back(path.column(s));
  b.origin_column = b.columns[spec.origin_index()];
  return b;
}

namespace {

constexpr std::size_t kMaxNeighborhood = 27;

inline std::span<const double> gather(const DriftBinding& b, int j, const PathView& p,
                                      std::array<double, kMaxNeighborhood>& buf) {
  for (std::size_t k = 0; k < b.columns.size(); ++k) buf[k] = p(j, b.columns[k]);
  return {buf.data(), b.columns.size()};
}

inline double markov_value(const MarkovianDrift& m, double time, std::span<const double> x) {
  const double v = m.b0(time, x);
  return m.bound > 0.0 ? std::clamp(v, -m.bound, m.bound) : v;
}

double kernel_value(const SpaceTimeKernelDrift& k, const DriftBinding& b, int j, const PathView& p) {
  std::array<double, kMaxNeighborhood> inc{};
  const std::size_t n = b.columns.size();
  const double now = p.time(j);
  double acc = 0.0;
  for (int l = 0; l < j; ++l) {
    const double dv = k.integrator.value(p.time(l + 1)) - k.integrator.value(p.time(l));
    if (dv == 0.0) continue;
    for (std::size_t c = 0; c < n; ++c) inc[c] = p(l, b.columns[c]) - p(0, b.columns[c]);
    acc += k.alpha0(now - p.time(l), std::span<const double>(inc.data(), n)) * dv;
  }
  return acc;
}

void check_binding(const DriftBinding& b) {
  if (b.columns.size() > kMaxNeighborhood) throw DomainError("drift neighborhood too large");
}

}  // namespace

double eval_drift(const DriftBinding& b, int j, const PathView& p) {
  const DriftSpec& spec = *b.spec;
  if (spec.is_zero()) return 0.0;
  check_binding(b);
  switch (spec.family) {
    case DriftFamily::Markovian: {
      std::array<double, kMaxNeighborhood> buf{};
      return markov_value(std::get<MarkovianDrift>(spec.params), p.time(j), gather(b, j, p, buf));
    }
    case DriftFamily::LongMemory: {
      const auto& lm = std::get<LongMemoryDrift>(spec.params);
      const double dt = p.dt();
      const double x0 = p(0, b.origin_column);
      double acc = 0.0;
      // The k = 0 term has a zero increment; skipping it avoids eps(0) for singular kernels.
      for (int k = 1; k < j; ++k) acc += lm.memory(p.time(k)) * (p(k, b.origin_column) - x0) * dt;
      return acc;
    }
    case DriftFamily::SpaceTimeKernel:
      return kernel_value(std::get<SpaceTimeKernelDrift>(spec.params), b, j, p);
  }
  return 0.0;
}

double eval_drift(const DriftSpec& spec, const Site& i, int j, const GridPath& path) {
  if (j < 0 || j > path.steps()) throw DomainError(fmt::format("step index {} outside the grid", j));
  return eval_drift(bind_drift(spec, i, path), j, PathView(path));
}

void drift_sequence(const DriftBinding& b, const PathView& p, std::span<double> out) {
  const DriftSpec& spec = *b.spec;
  const int m = p.steps();
  if (spec.is_zero()) {
    std::fill(out.begin(), out.begin() + m, 0.0);
    return;
  }
  check_binding(b);
  switch (spec.family) {
    case DriftFamily::Markovian: {
      const auto& mk = std::get<MarkovianDrift>(spec.params);
      std::array<double, kMaxNeighborhood> buf{};
      for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(j)] = markov_value(mk, p.time(j), gather(b, j, p, buf));
      return;
    }
    case DriftFamily::LongMemory: {
      const auto& lm = std::get<LongMemoryDrift>(spec.params);
      const double dt = p.dt();
      const double x0 = p(0, b.origin_column);
      double acc = 0.0;
      for (int j = 0; j < m; ++j) {
        out[static_cast<std::size_t>(j)] = acc;
        if (j >= 1) acc += lm.memory(p.time(j)) * (p(j, b.origin_column) - x0) * dt;
      }
      return;
    }
    case DriftFamily::SpaceTimeKernel: {
      const auto& k = std::get<SpaceTimeKernelDrift>(spec.params);
      for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(j)] = kernel_value(k, b, j, p);
      return;
    }
  }
}

namespace {

// Drift values on a grid, without heap traffic for the usual grid sizes.
class DriftBuffer {
 public:
  explicit DriftBuffer(int m) : heap_(m > kInline ? static_cast<std::size_t>(m) : 0) {}
  std::span<double> span(int m) {
    return m > kInline ? std::span<double>(heap_) : std::span<double>(inline_.data(), static_cast<std::size_t>(m));
  }

 private:
  static constexpr int kInline = 512;
  std::array<double, kInline> inline_{};
  std::vector<double> heap_;
};

}  // namespace

double ito_integral(const DriftBinding& b, const PathView& p) { return girsanov_F(b, p).ito; }

double ito_integral(const DriftSpec& spec, const Site& i, const GridPath& path) {
  return ito_integral(bind_drift(spec, i, path), PathView(path));
}

GirsanovValue girsanov_F(const DriftBinding& b, const PathView& p) {
  GirsanovValue g;
  g.site = b.site;
  if (b.spec->is_zero()) return g;
  const int m = p.steps();
  DriftBuffer buffer(m);
  auto drift = buffer.span(m);
  drift_sequence(b, p, drift);
  const double dt = p.dt();
  double ito = 0.0;
  double quad = 0.0;
  for (int j = 1; j <= m; ++j) {
    const double v = drift[static_cast<std::size_t>(j - 1)];
    ito += v * (p(j, b.origin_column) - p(j - 1, b.origin_column));
    quad += v * v * dt;
  }
  g.ito = ito;
  g.quad = quad;
  g.value = ito - 0.5 * quad;
  return g;
}

GirsanovValue girsanov_F(const DriftSpec& spec, const Site& i, const GridPath& path) {
  return girsanov_F(bind_drift(spec, i, path), PathView(path));
}

double reversed_F(const DriftBinding& b, const GridPath& path) { return girsanov_F(b, PathView(path, true)).value; }

double reversed_F(const DriftSpec& spec, const Site& i, const GridPath& path) {
  return reversed_F(bind_drift(spec, i, path), path);
}

namespace {

const MarkovianDrift& require_markovian(const DriftSpec& spec, const char* op) {
  if (spec.family != DriftFamily::Markovian)
    throw DomainError(fmt::format("{} needs a Markovian drift, got {}", op, to_string(spec.family)));
  const auto& m = std::get<MarkovianDrift>(spec.params);
  if (!m.b0_prime) throw DomainError(fmt::format("{} needs the derivative b0'", op));
  return m;
}

}  // namespace

double markov_reversed_closed_form(const DriftSpec& spec, const Site& i, const GridPath& path) {
  const auto& mk = require_markovian(spec, "markov_reversed_closed_form");
  if (spec.is_zero()) return 0.0;
  const auto b = bind_drift(spec, i, path);
  check_binding(b);
  const PathView p(path);
  const int m = p.steps();
  const double dt = p.dt();
  std::array<double, kMaxNeighborhood> buf{};
  double stoch = 0.0;
  double lebesgue = 0.0;
  for (int j = 0; j < m; ++j) {
    const double tau = p.time(m - j);
    const auto x = gather(b, j, p, buf);
    const double v = markov_value(mk, tau, x);
    stoch += v * (p(j + 1, b.origin_column) - p(j, b.origin_column));
    lebesgue += (mk.b0_prime(tau, x) + 0.5 * v * v) * dt;
  }
  return -stoch - lebesgue;
}

ReversalParts markov_reversal_parts(const DriftSpec& spec, const Site& i, const GridPath& path) {
  const auto& mk = require_markovian(spec, "markov_reversal_parts");
  const auto b = bind_drift(spec, i, path);
  check_binding(b);
  const PathView p(path);
  const int m = p.steps();
  std::vector<double> v(static_cast<std::size_t>(m + 1));
  std::array<double, kMaxNeighborhood> buf{};
  for (int j = 0; j <= m; ++j)
    v[static_cast<std::size_t>(j)] = spec.is_zero() ? 0.0 : markov_value(mk, p.time(m - j), gather(b, j, p, buf));
  ReversalParts parts;
  for (int j = 0; j < m; ++j) {
    const double dx = p(j + 1, b.origin_column) - p(j, b.origin_column);
    const double lo = v[static_cast<std::size_t>(j)];
    const double hi = v[static_cast<std::size_t>(j + 1)];
    parts.backward += hi * dx;
    parts.ito += lo * dx;
    parts.stratonovich += 0.5 * (lo + hi) * dx;
  }
  return parts;
}

double longmem_J_fubini(const DriftSpec& spec, const Site& i, const GridPath& path) {
  if (spec.family != DriftFamily::LongMemory)
    throw DomainError(fmt::format("longmem_J_fubini needs a long-memory drift, got {}", to_string(spec.family)));
  if (spec.is_zero()) return 0.0;
  const auto& lm = std::get<LongMemoryDrift>(spec.params);
  const auto b = bind_drift(spec, i, path);
  const PathView p(path);
  const int m = p.steps();
  const double dt = p.dt();
  const double x0 = p(0, b.origin_column);
  const double xt = p(m, b.origin_column);
  double acc = 0.0;
  for (int k = 1; k + 1 <= m; ++k)
    acc += lm.memory(p.time(k)) * dt * (xt - p(k + 1, b.origin_column)) * (p(k, b.origin_column) - x0);
  return acc;
}

double gaussian_abs_mgf(double a) { return 2.0 * std::exp(0.5 * a * a) * 0.5 * std::erfc(-a / std::sqrt(2.0)); }

MeanEstimate a3_moment_estimate(const DriftSpec& spec, const Configuration& x, double t, int steps,
                                std::size_t n_paths, int p_exponent, std::uint64_t root_seed,
                                std::uint64_t stream_tag, Execution execution) {
  if (p_exponent < 3 || p_exponent % 2 == 0)
    throw DomainError(fmt::format("moment exponent p must be odd and >= 3, got {}", p_exponent));
  const TimeGrid grid(t, steps);
  const Site origin = Site::origin(spec.dim());
  const SiteSet sites = spec.block(origin);
  for (const auto& s : sites) (void)x.at(s);
  if (spec.is_zero()) return MeanEstimate{0.0, 0.0, n_paths};
  const double power = 2.0 * p_exponent;
  auto make_worker = [&]() {
    return [&, path = GridPath(grid, sites), binding = std::optional<DriftBinding>()](
               std::size_t s, std::span<double> out) mutable {
      if (!binding) binding = bind_drift(spec, origin, path);
      fill_brownian(path, x, SeedStream{root_seed, derive_stream_index(stream_tag, s)});
      const double f = reversed_F(*binding, path);
      if (!std::isfinite(f) || std::abs(f) > 700.0)
        throw NumericalGuardError(fmt::format("|F o theta| = {} on path {}: drift bounds violated", f, s));
      out[0] = std::pow(std::expm1(std::abs(f)), power);
    };
  };
  return estimate_means(n_paths, 1, make_worker, execution)[0];
}

}  // namespace gibbsflow
