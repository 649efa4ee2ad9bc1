#pragma once

// Uniform time grids, multi-site grid paths, Brownian motion / bridge sampling,
// Euler-Maruyama for the finite-volume system and grid-level time reversal.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gibbsflow/lattice.hpp"
#include "gibbsflow/random.hpp"

namespace gibbsflow {

struct DriftSpec;

class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  double horizon() const noexcept { return horizon_; }
  int steps() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }
  /// s_j = j * dt, with s_M = horizon exactly.
  double time(int j) const noexcept { return j == steps_ ? horizon_ : j * dt_; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double horizon_;
  int steps_;
  double dt_;
};

class GridPath {
 public:
  /// Zero-filled path over `sites` (sorted and deduplicated on construction).
  GridPath(TimeGrid grid, std::vector<Site> sites);

  const TimeGrid& grid() const noexcept { return grid_; }
  int steps() const noexcept { return grid_.steps(); }
  const std::vector<Site>& sites() const noexcept { return sites_; }
  std::size_t n_sites() const noexcept { return sites_.size(); }

  std::optional<std::size_t> find_column(const Site& s) const;
  /// Throws MissingSiteError.
  std::size_t column(const Site& s) const;

  double operator()(int j, std::size_t col) const { return values_[static_cast<std::size_t>(j) * sites_.size() + col]; }
  double& operator()(int j, std::size_t col) { return values_[static_cast<std::size_t>(j) * sites_.size() + col]; }
  std::span<const double> row(int j) const {
    return {values_.data() + static_cast<std::size_t>(j) * sites_.size(), sites_.size()};
  }
  std::span<const double> values() const noexcept { return values_; }

  /// Values at s_j as a configuration on `box` (every box site must be on the path).
  Configuration snapshot(int j, const Box& box) const;

  friend bool operator==(const GridPath&, const GridPath&) = default;

 private:
  TimeGrid grid_;
  std::vector<Site> sites_;
  std::vector<double> values_;
};

/// Read-only view of a path, optionally time-reversed: reversed(j) = path(M - j).
class PathView {
 public:
  PathView(const GridPath& path, bool reversed = false) : path_(&path), reversed_(reversed) {}  // NOLINT

  const GridPath& path() const noexcept { return *path_; }
  bool reversed() const noexcept { return reversed_; }
  int steps() const noexcept { return path_->steps(); }
  double dt() const noexcept { return path_->grid().dt(); }
  double time(int j) const noexcept { return path_->grid().time(j); }
  double operator()(int j, std::size_t col) const { return (*path_)(reversed_ ? path_->steps() - j : j, col); }

 private:
  const GridPath* path_;
  bool reversed_;
};

/// Per-site Brownian increments are keyed by (stream, site, step), so the same
/// stream gives the same noise on a site whatever other sites are simulated.
double brownian_increment(const SeedStream& stream, const Site& site, int step, double sqrt_dt);

/// Fills `path` in place with a Brownian motion started at x0 (x0 must cover the path's sites).
void fill_brownian(GridPath& path, const Configuration& x0, const SeedStream& stream);

GridPath sample_brownian(const Configuration& x0, const TimeGrid& grid, const SeedStream& stream);

/// Brownian bridge from x0 at time 0 to x1 at time t; endpoints are set exactly.
GridPath sample_bridge(const Configuration& x0, const Configuration& x1, const TimeGrid& grid,
                       const SeedStream& stream);

/// Euler-Maruyama for dX_i = b_i dt + dB_i on the box of x0. Sites with N + i outside the box
/// get pure Brownian increments. With zero drift the result equals sample_brownian bitwise.
GridPath euler_maruyama(const Configuration& x0, const DriftSpec& drift, const TimeGrid& grid,
                        const SeedStream& stream);

GridPath reverse_path(const GridPath& path);

/// Debug dump: int64 d, int64 n_sites, int64 M, f64 t, u64 seed, n_sites x d int64 site coordinates,
/// then (M+1) x n_sites f64 row-major.
/// Little-endian hosts only.
void write_path_binary(const std::string& file, const GridPath& path, std::uint64_t seed);
GridPath read_path_binary(const std::string& file, std::uint64_t* seed = nullptr);

}  // namespace gibbsflow
