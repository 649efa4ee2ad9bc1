#include "gibbsflow/path.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "gibbsflow/drift.hpp"
#include "gibbsflow/errors.hpp"

namespace gibbsflow {

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps), dt_(horizon / steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError(fmt::format("time horizon must be positive, got {}", horizon));
  if (steps < 1) throw DomainError(fmt::format("grid needs at least one step, got {}", steps));
}

GridPath::GridPath(TimeGrid grid, std::vector<Site> sites) : grid_(grid), sites_(make_site_set(std::move(sites))) {
  values_.assign(static_cast<std::size_t>(grid_.steps() + 1) * sites_.size(), 0.0);
}

std::optional<std::size_t> GridPath::find_column(const Site& s) const {
  const auto it = std::lower_bound(sites_.begin(), sites_.end(), s);
  if (it == sites_.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - sites_.begin());
}

std::size_t GridPath::column(const Site& s) const {
  if (auto c = find_column(s)) return *c;
  throw MissingSiteError(fmt::format("site ({}) is not on the path", s.to_string()));
}

Configuration GridPath::snapshot(int j, const Box& box) const {
  Configuration out(box);
  for (std::size_t k = 0; k < box.size(); ++k) out.values()[k] = (*this)(j, column(box.site_at(k)));
  return out;
}

double brownian_increment(const SeedStream& stream, const Site& site, int step, double sqrt_dt) {
  const auto pair = stream.normal_pair(site_key(site), static_cast<std::uint32_t>(step / 2));
  return sqrt_dt * pair[static_cast<std::size_t>(step % 2)];
}

void fill_brownian(GridPath& path, const Configuration& x0, const SeedStream& stream) {
  const int m = path.steps();
  const double sqrt_dt = std::sqrt(path.grid().dt());
  for (std::size_t c = 0; c < path.n_sites(); ++c) {
    const std::uint32_t lane = site_key(path.sites()[c]);
    double x = x0.at(path.sites()[c]);
    path(0, c) = x;
    for (int j = 0; j < m; j += 2) {
      const auto z = stream.normal_pair(lane, static_cast<std::uint32_t>(j / 2));
      x += sqrt_dt * z[0];
      path(j + 1, c) = x;
      if (j + 1 < m) {
        x += sqrt_dt * z[1];
        path(j + 2, c) = x;
      }
    }
  }
}

GridPath sample_brownian(const Configuration& x0, const TimeGrid& grid, const SeedStream& stream) {
  GridPath path(grid, x0.box().sites());
  fill_brownian(path, x0, stream);
  return path;
}

GridPath sample_bridge(const Configuration& x0, const Configuration& x1, const TimeGrid& grid,
                       const SeedStream& stream) {
  if (!(x0.box() == x1.box())) throw DomainError("bridge endpoints must live on the same box");
  GridPath path(grid, x0.box().sites());
  fill_brownian(path, Configuration(x0.box(), 0.0), stream);
  const int m = grid.steps();
  for (std::size_t c = 0; c < path.n_sites(); ++c) {
    const double a = x0.values()[c];
    const double b = x1.values()[c];
    const double w_t = path(m, c);
    for (int j = 1; j < m; ++j) {
      const double frac = grid.time(j) / grid.horizon();
      path(j, c) = a + frac * (b - a) + path(j, c) - frac * w_t;
    }
    path(0, c) = a;
    path(m, c) = b;
  }
  return path;
}

GridPath euler_maruyama(const Configuration& x0, const DriftSpec& drift, const TimeGrid& grid,
                        const SeedStream& stream) {
  const Box& box = x0.box();
  GridPath path(grid, box.sites());
  if (drift.is_zero()) {
    fill_brownian(path, x0, stream);
    return path;
  }
  std::vector<std::optional<DriftBinding>> bindings(path.n_sites());
  std::vector<std::uint32_t> lanes(path.n_sites());
  for (std::size_t c = 0; c < path.n_sites(); ++c) {
    const Site& i = path.sites()[c];
    lanes[c] = site_key(i);
    const SiteSet block = drift.block(i);
    if (std::all_of(block.begin(), block.end(), [&](const Site& s) { return box.contains(s); }))
      bindings[c] = bind_drift(drift, i, path);
    path(0, c) = x0.at(i);
  }
  const double dt = grid.dt();
  const double sqrt_dt = std::sqrt(dt);
  const PathView view(path);
  for (int j = 0; j < grid.steps(); ++j) {
    for (std::size_t c = 0; c < path.n_sites(); ++c) {
      const auto z = stream.normal_pair(lanes[c], static_cast<std::uint32_t>(j / 2));
      const double noise = sqrt_dt * z[static_cast<std::size_t>(j % 2)];
      const double b = bindings[c] ? eval_drift(*bindings[c], j, view) : 0.0;
      path(j + 1, c) = bindings[c] ? path(j, c) + b * dt + noise : path(j, c) + noise;
    }
  }
  return path;
}

GridPath reverse_path(const GridPath& path) {
  GridPath out(path.grid(), path.sites());
  const int m = path.steps();
  for (int j = 0; j <= m; ++j)
    for (std::size_t c = 0; c < path.n_sites(); ++c) out(j, c) = path(m - j, c);
  return out;
}

namespace {

template <class T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated path dump");
  return value;
}

}  // namespace

void write_path_binary(const std::string& file, const GridPath& path, std::uint64_t seed) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot open {} for writing", file));
  const int dim = path.sites().empty() ? 0 : path.sites().front().dim();
  put<std::int64_t>(out, dim);
  put<std::int64_t>(out, static_cast<std::int64_t>(path.n_sites()));
  put<std::int64_t>(out, path.steps());
  put<double>(out, path.grid().horizon());
  put<std::uint64_t>(out, seed);
  // Site coordinates follow the header so the dump is self-describing.
  for (const auto& s : path.sites())
    for (int k = 0; k < dim; ++k) put<std::int64_t>(out, s[k]);
  for (double v : path.values()) put<double>(out, v);
}

GridPath read_path_binary(const std::string& file, std::uint64_t* seed) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", file));
  const auto dim = get<std::int64_t>(in);
  const auto n_sites = get<std::int64_t>(in);
  const auto steps = get<std::int64_t>(in);
  const auto horizon = get<double>(in);
  const auto s = get<std::uint64_t>(in);
  if (seed) *seed = s;
  if (dim < 1 || dim > kMaxDim || n_sites < 0) throw Error("malformed path dump header");
  std::vector<Site> sites;
  for (std::int64_t k = 0; k < n_sites; ++k) {
    std::vector<int> coords(static_cast<std::size_t>(dim));
    for (auto& c : coords) c = static_cast<int>(get<std::int64_t>(in));
    sites.emplace_back(std::span<const int>(coords));
  }
  GridPath path(TimeGrid(horizon, static_cast<int>(steps)), sites);
  for (int j = 0; j <= path.steps(); ++j)
    for (std::size_t c = 0; c < path.n_sites(); ++c) path(j, c) = get<double>(in);
  return path;
}

}  // namespace gibbsflow
