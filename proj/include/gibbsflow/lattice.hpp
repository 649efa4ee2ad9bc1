#pragma once

// Sites, boxes, configurations and finite-range interactions on Z^d.

#include <array>
#include <compare>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gibbsflow {

inline constexpr int kMaxDim = 3;

class Site {
 public:
  Site() = default;
  Site(std::initializer_list<int> coords);
  explicit Site(std::span<const int> coords);

  static Site origin(int dim);
  static Site unit(int dim, int axis, int sign = 1);

  int dim() const noexcept { return dim_; }
  int operator[](int axis) const { return coords_[static_cast<std::size_t>(axis)]; }

  Site operator+(const Site& other) const;
  Site operator-(const Site& other) const;
  Site operator-() const;

  // Lexicographic; unused trailing coordinates are always zero.
  friend bool operator==(const Site&, const Site&) = default;
  friend auto operator<=>(const Site&, const Site&) = default;

  /// "3" in d=1, "1;-2" in d=2. Safe inside CSV fields.
  std::string to_string() const;

 private:
  std::array<int, kMaxDim> coords_{};
  int dim_ = 0;
};

enum class Metric { L1, Linf };

int distance(const Site& a, const Site& b, Metric metric);

/// Sorted, duplicate-free set of sites.
using SiteSet = std::vector<Site>;

SiteSet make_site_set(std::vector<Site> sites);
int diameter(const SiteSet& set, Metric metric);
bool intersects(const SiteSet& a, const SiteSet& b);
bool is_subset(const SiteSet& inner, const SiteSet& outer);
SiteSet translate(const SiteSet& set, const Site& shift);
/// Sites joined by '|', e.g. "-1|0|1".
std::string to_string(const SiteSet& set);

/// Orders support lists by cardinality, then lexicographically.
bool support_less(const SiteSet& a, const SiteSet& b);

class Box {
 public:
  Box(Site lo, Site hi);

  /// One-dimensional box {lo, ..., hi}.
  static Box chain(int lo, int hi);
  /// Chain of n sites centered at 0 (n odd).
  static Box centered_chain(int n_sites);

  int dim() const noexcept { return lo_.dim(); }
  const Site& lo() const noexcept { return lo_; }
  const Site& hi() const noexcept { return hi_; }
  std::size_t size() const noexcept { return size_; }

  bool contains(const Site& s) const;
  bool contains(const Box& other) const;
  std::size_t index_of(const Site& s) const;
  Site site_at(std::size_t index) const;
  std::vector<Site> sites() const;

  Box expanded(int r) const;
  Box translated(const Site& shift) const;

  friend bool operator==(const Box&, const Box&) = default;

 private:
  Site lo_;
  Site hi_;
  std::size_t size_ = 0;
};

class Configuration {
 public:
  explicit Configuration(Box box, double fill = 0.0);
  Configuration(Box box, std::vector<double> values);

  const Box& box() const noexcept { return box_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  bool contains(const Site& s) const { return box_.contains(s); }
  /// Throws MissingSiteError outside the box.
  double at(const Site& s) const;
  std::optional<double> find(const Site& s) const;
  void set(const Site& s, double value);

  /// (tau_i x)_j = x_{j-i}; the result lives on box + shift.
  Configuration translated(const Site& shift) const;
  Configuration restricted(const Box& sub) const;

  /// x_inner on inner's box, outer elsewhere. The result has outer's box, which must contain inner's.
  static Configuration concat(const Configuration& inner, const Configuration& outer);

  friend bool operator==(const Configuration&, const Configuration&) = default;

 private:
  Box box_;
  std::vector<double> values_;
};

/// Finite-range, translation-invariant singleton + pair interaction.
struct InteractionSpec {
  std::string name;
  int range = 0;
  Metric metric = Metric::Linf;
  /// phi_{{i}}(x_i); empty when the interaction has no single-site part.
  std::function<double(double)> single_site;
  /// phi_{{i,j}} for i < j with offset = j - i, 1 <= |offset| <= range; empty when absent.
  std::function<double(const Site& offset, double a, double b)> pair;
  double sup_norm = 0.0;
  double lipschitz = 0.0;

  bool has_single_site() const { return static_cast<bool>(single_site); }
  bool has_pair() const { return static_cast<bool>(pair) && range > 0; }
  bool is_zero() const { return !has_single_site() && !has_pair(); }

  /// True when phi_A is declared nonzero for this support.
  bool is_active(const SiteSet& support) const;
  /// phi_A with `values` listed in the (sorted) order of `support`.
  double potential(const SiteSet& support, std::span<const double> values) const;
};

InteractionSpec zero_interaction();
/// phi_{{i}} = lambda tanh(x_i^2), phi_{{i,j}} = J cos(x_i - x_j) within range.
InteractionSpec stock_interaction(double coupling, double single_site_strength, int range = 1,
                                  Metric metric = Metric::Linf);
InteractionSpec cos_pair_interaction(double coupling, int range = 1, Metric metric = Metric::Linf);
/// Single-site only: phi_{{i}} = strength * cos(x_i).
InteractionSpec cos_single_interaction(double strength);

/// All singleton and pair supports (diam <= range) meeting `region`, ordered by support_less.
std::vector<SiteSet> supports_touching(const Box& region, const InteractionSpec& spec);
/// Supports fully inside `region`.
std::vector<SiteSet> supports_inside(const Box& region, const InteractionSpec& spec);
/// Supports containing `site`.
std::vector<SiteSet> supports_containing(const Site& site, const InteractionSpec& spec);

/// Sum of phi_A over `supports`, reading site values through `value_of`.
template <class ValueOf>
double sum_potentials(const std::vector<SiteSet>& supports, const InteractionSpec& spec,
                      ValueOf&& value_of) {
  double total = 0.0;
  std::array<double, 2> buf{};
  for (const auto& support : supports) {
    if (!spec.is_active(support)) continue;
    for (std::size_t k = 0; k < support.size(); ++k) buf[k] = value_of(support[k]);
    total += spec.potential(support, std::span<const double>(buf.data(), support.size()));
  }
  return total;
}

/// h_Lambda(x_Lambda, z_{Lambda^c}). Throws MissingSiteError if z lacks a needed collar site.
double hamiltonian(const Box& region, const Configuration& x, const Configuration& z,
                   const InteractionSpec& spec);

/// Free-boundary exponent: sum of phi_A over A inside the region.
double free_energy_sum(const Box& region, const Configuration& x, const InteractionSpec& spec);

/// Per-site reference measure m(dx) = exp(log_density(x)) dx.
struct AprioriMeasure {
  std::string name;
  std::function<double(double)> log_density;
  double normalization = 1.0;
  /// Set for centered Gaussian measures; enables Gauss-Hermite rules.
  std::optional<double> gaussian_sigma;

  double density(double x) const;

  static AprioriMeasure standard_gaussian();
  static AprioriMeasure gaussian(double sigma);
  /// Finite measure with the given log-density; the normalization is computed numerically.
  static AprioriMeasure from_log_density(std::string name, std::function<double(double)> log_density);
};

}  // namespace gibbsflow
