#include "gibbsflow/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <fmt/format.h>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

Site::Site(std::initializer_list<int> coords)
    : Site(std::span<const int>(coords.begin(), coords.size())) {}

Site::Site(std::span<const int> coords) {
  if (coords.empty() || coords.size() > static_cast<std::size_t>(kMaxDim)) {
    throw DomainError(fmt::format("site dimension must be in [1, {}], got {}", kMaxDim, coords.size()));
  }
  dim_ = static_cast<int>(coords.size());
  std::copy(coords.begin(), coords.end(), coords_.begin());
}

Site Site::origin(int dim) {
  if (dim < 1 || dim > kMaxDim) throw DomainError(fmt::format("unsupported dimension {}", dim));
  Site s;
  s.dim_ = dim;
  return s;
}

Site Site::unit(int dim, int axis, int sign) {
  Site s = origin(dim);
  if (axis < 0 || axis >= dim) throw DomainError("axis out of range");
  s.coords_[static_cast<std::size_t>(axis)] = sign;
  return s;
}

Site Site::operator+(const Site& other) const {
  if (dim_ != other.dim_) throw DomainError("site dimension mismatch");
  Site s = *this;
  for (int k = 0; k < dim_; ++k) s.coords_[k] += other.coords_[k];
  return s;
}

Site Site::operator-(const Site& other) const { return *this + (-other); }

Site Site::operator-() const {
  Site s = *this;
  for (int k = 0; k < dim_; ++k) s.coords_[k] = -s.coords_[k];
  return s;
}

std::string Site::to_string() const {
  std::string out;
  for (int k = 0; k < dim_; ++k) {
    if (k > 0) out += ';';
    out += std::to_string(coords_[k]);
  }
  return out;
}

int distance(const Site& a, const Site& b, Metric metric) {
  if (a.dim() != b.dim()) throw DomainError("site dimension mismatch");
  int acc = 0;
  for (int k = 0; k < a.dim(); ++k) {
    const int d = std::abs(a[k] - b[k]);
    acc = metric == Metric::L1 ? acc + d : std::max(acc, d);
  }
  return acc;
}

SiteSet make_site_set(std::vector<Site> sites) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

int diameter(const SiteSet& set, Metric metric) {
  int diam = 0;
  for (std::size_t a = 0; a < set.size(); ++a)
    for (std::size_t b = a + 1; b < set.size(); ++b) diam = std::max(diam, distance(set[a], set[b], metric));
  return diam;
}

bool intersects(const SiteSet& a, const SiteSet& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib) ++ia; else ++ib;
  }
  return false;
}

bool is_subset(const SiteSet& inner, const SiteSet& outer) {
  return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

SiteSet translate(const SiteSet& set, const Site& shift) {
  SiteSet out;
  out.reserve(set.size());
  for (const auto& s : set) out.push_back(s + shift);
  return out;  // translation preserves lexicographic order
}

std::string to_string(const SiteSet& set) {
  std::string out;
  for (std::size_t k = 0; k < set.size(); ++k) {
    if (k > 0) out += '|';
    out += set[k].to_string();
  }
  return out;
}

bool support_less(const SiteSet& a, const SiteSet& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

// ---------------------------------------------------------------------------

Box::Box(Site lo, Site hi) : lo_(lo), hi_(hi) {
  if (lo.dim() != hi.dim() || lo.dim() < 1) throw DomainError("box corners must share a dimension >= 1");
  size_ = 1;
  for (int k = 0; k < lo.dim(); ++k) {
    if (lo[k] > hi[k]) throw DomainError(fmt::format("box lower corner exceeds upper corner on axis {}", k));
    size_ *= static_cast<std::size_t>(hi[k] - lo[k] + 1);
  }
}

Box Box::chain(int lo, int hi) { return Box(Site{lo}, Site{hi}); }

Box Box::centered_chain(int n_sites) {
  if (n_sites < 1 || n_sites % 2 == 0) throw DomainError("centered chain needs an odd number of sites");
  const int half = n_sites / 2;
  return chain(-half, half);
}

bool Box::contains(const Site& s) const {
  if (s.dim() != dim()) return false;
  for (int k = 0; k < dim(); ++k)
    if (s[k] < lo_[k] || s[k] > hi_[k]) return false;
  return true;
}

bool Box::contains(const Box& other) const { return contains(other.lo_) && contains(other.hi_); }

std::size_t Box::index_of(const Site& s) const {
  if (!contains(s)) throw MissingSiteError(fmt::format("site ({}) outside box", s.to_string()));
  std::size_t idx = 0;
  for (int k = 0; k < dim(); ++k) {
    const auto extent = static_cast<std::size_t>(hi_[k] - lo_[k] + 1);
    idx = idx * extent + static_cast<std::size_t>(s[k] - lo_[k]);
  }
  return idx;
}

Site Box::site_at(std::size_t index) const {
  if (index >= size_) throw DomainError("box index out of range");
  std::array<int, kMaxDim> c{};
  for (int k = dim() - 1; k >= 0; --k) {
    const auto extent = static_cast<std::size_t>(hi_[k] - lo_[k] + 1);
    c[static_cast<std::size_t>(k)] = lo_[k] + static_cast<int>(index % extent);
    index /= extent;
  }
  return Site(std::span<const int>(c.data(), static_cast<std::size_t>(dim())));
}

std::vector<Site> Box::sites() const {
  std::vector<Site> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(site_at(i));
  return out;
}

Box Box::expanded(int r) const {
  std::array<int, kMaxDim> lo{};
  std::array<int, kMaxDim> hi{};
  for (int k = 0; k < dim(); ++k) {
    lo[static_cast<std::size_t>(k)] = lo_[k] - r;
    hi[static_cast<std::size_t>(k)] = hi_[k] + r;
  }
  const auto d = static_cast<std::size_t>(dim());
  return Box(Site(std::span<const int>(lo.data(), d)), Site(std::span<const int>(hi.data(), d)));
}

Box Box::translated(const Site& shift) const { return Box(lo_ + shift, hi_ + shift); }

// ---------------------------------------------------------------------------

Configuration::Configuration(Box box, double fill) : box_(box), values_(box.size(), fill) {}

Configuration::Configuration(Box box, std::vector<double> values) : box_(box), values_(std::move(values)) {
  if (values_.size() != box_.size()) throw DomainError("configuration size does not match its box");
}

double Configuration::at(const Site& s) const {
  if (!box_.contains(s)) throw MissingSiteError(fmt::format("configuration has no value at site ({})", s.to_string()));
  return values_[box_.index_of(s)];
}

std::optional<double> Configuration::find(const Site& s) const {
  if (!box_.contains(s)) return std::nullopt;
  return values_[box_.index_of(s)];
}

void Configuration::set(const Site& s, double value) { values_[box_.index_of(s)] = value; }

Configuration Configuration::translated(const Site& shift) const {
  return Configuration(box_.translated(shift), values_);
}

Configuration Configuration::restricted(const Box& sub) const {
  if (!box_.contains(sub)) throw MissingSiteError("restriction box not inside configuration box");
  Configuration out(sub);
  for (std::size_t i = 0; i < sub.size(); ++i) out.values_[i] = at(sub.site_at(i));
  return out;
}

Configuration Configuration::concat(const Configuration& inner, const Configuration& outer) {
  if (!outer.box().contains(inner.box())) throw MissingSiteError("outer configuration does not cover inner box");
  Configuration out = outer;
  for (std::size_t i = 0; i < inner.box().size(); ++i) out.set(inner.box().site_at(i), inner.values_[i]);
  return out;
}

// ---------------------------------------------------------------------------

bool InteractionSpec::is_active(const SiteSet& support) const {
  if (support.size() == 1) return has_single_site();
  if (support.size() == 2) return has_pair() && diameter(support, metric) <= range;
  return false;
}

double InteractionSpec::potential(const SiteSet& support, std::span<const double> values) const {
  if (support.size() == 1) return has_single_site() ? single_site(values[0]) : 0.0;
  if (support.size() == 2) {
    if (!has_pair() || distance(support[0], support[1], metric) > range) return 0.0;
    return pair(support[1] - support[0], values[0], values[1]);
  }
  return 0.0;
}

InteractionSpec zero_interaction() {
  InteractionSpec spec;
  spec.name = "zero";
  return spec;
}

namespace {
// max_x d/dx tanh(x^2) = max 2x sech^2(x^2), attained near x = 0.7224.
constexpr double kTanhSquareLipschitz = 1.1131159;
}  // namespace

InteractionSpec stock_interaction(double coupling, double single_site_strength, int range, Metric metric) {
  InteractionSpec spec;
  spec.name = "stock";
  spec.range = range;
  spec.metric = metric;
  if (single_site_strength != 0.0) {
    spec.single_site = [single_site_strength](double x) { return single_site_strength * std::tanh(x * x); };
  }
  if (coupling != 0.0 && range > 0) {
    spec.pair = [coupling](const Site&, double a, double b) { return coupling * std::cos(a - b); };
  }
  spec.sup_norm = std::max(std::abs(coupling), std::abs(single_site_strength));
  spec.lipschitz = std::max(2.0 * std::abs(coupling), kTanhSquareLipschitz * std::abs(single_site_strength));
  return spec;
}

InteractionSpec cos_pair_interaction(double coupling, int range, Metric metric) {
  return stock_interaction(coupling, 0.0, range, metric);
}

InteractionSpec cos_single_interaction(double strength) {
  InteractionSpec spec;
  spec.name = "cos_single";
  spec.single_site = [strength](double x) { return strength * std::cos(x); };
  spec.sup_norm = std::abs(strength);
  spec.lipschitz = std::abs(strength);
  return spec;
}

namespace {

// Offsets o > 0 (lexicographically) with 1 <= |o| <= r in the given metric.
std::vector<Site> positive_offsets(int dim, int r, Metric metric) {
  std::vector<Site> out;
  const Box cube = Box(Site::origin(dim), Site::origin(dim)).expanded(r);
  const Site zero = Site::origin(dim);
  for (const auto& o : cube.sites()) {
    if (o > zero && distance(o, zero, metric) <= r) out.push_back(o);
  }
  return out;
}

}  // namespace

std::vector<SiteSet> supports_touching(const Box& region, const InteractionSpec& spec) {
  std::vector<SiteSet> out;
  for (const auto& s : region.sites()) out.push_back({s});
  if (spec.range > 0) {
    const auto offsets = positive_offsets(region.dim(), spec.range, spec.metric);
    for (const auto& a : region.expanded(spec.range).sites()) {
      for (const auto& o : offsets) {
        const Site b = a + o;
        if (region.contains(a) || region.contains(b)) out.push_back({a, b});
      }
    }
  }
  std::sort(out.begin(), out.end(), support_less);
  return out;
}

std::vector<SiteSet> supports_inside(const Box& region, const InteractionSpec& spec) {
  std::vector<SiteSet> out;
  for (auto& support : supports_touching(region, spec)) {
    if (std::all_of(support.begin(), support.end(), [&](const Site& s) { return region.contains(s); }))
      out.push_back(std::move(support));
  }
  return out;
}

std::vector<SiteSet> supports_containing(const Site& site, const InteractionSpec& spec) {
  return supports_touching(Box(site, site), spec);
}

double hamiltonian(const Box& region, const Configuration& x, const Configuration& z,
                   const InteractionSpec& spec) {
  if (!x.box().contains(region)) throw MissingSiteError("configuration x does not cover the region");
  return sum_potentials(supports_touching(region, spec), spec, [&](const Site& s) {
    return region.contains(s) ? x.at(s) : z.at(s);
  });
}

double free_energy_sum(const Box& region, const Configuration& x, const InteractionSpec& spec) {
  return sum_potentials(supports_inside(region, spec), spec, [&](const Site& s) { return x.at(s); });
}

// ---------------------------------------------------------------------------

double AprioriMeasure::density(double x) const { return std::exp(log_density(x)); }

AprioriMeasure AprioriMeasure::standard_gaussian() { return gaussian(1.0); }

AprioriMeasure AprioriMeasure::gaussian(double sigma) {
  if (!(sigma > 0.0)) throw DomainError("gaussian a priori measure needs sigma > 0");
  AprioriMeasure m;
  m.name = sigma == 1.0 ? "gaussian" : fmt::format("gaussian(sigma={})", sigma);
  const double log_norm = std::log(sigma) + 0.5 * std::log(2.0 * M_PI);
  m.log_density = [sigma, log_norm](double x) { return -0.5 * (x / sigma) * (x / sigma) - log_norm; };
  m.normalization = 1.0;
  m.gaussian_sigma = sigma;
  return m;
}

AprioriMeasure AprioriMeasure::from_log_density(std::string name, std::function<double(double)> log_density) {
  AprioriMeasure m;
  m.name = std::move(name);
  m.log_density = std::move(log_density);
  boost::math::quadrature::sinh_sinh<double> integrator;
  const auto& f = m.log_density;
  m.normalization = integrator.integrate([&f](double x) { return std::exp(f(x)); });
  if (!std::isfinite(m.normalization) || m.normalization <= 0.0)
    throw DomainError("a priori density does not integrate to a finite positive value");
  return m;
}

}  // namespace gibbsflow
