#pragma once

// Counter-based random streams. Every draw is a pure function of
// (root seed, stream index, lane, block), so results never depend on
// which worker computed them or in what order.

#include <array>
#include <cstdint>
#include <limits>

#include "gibbsflow/lattice.hpp"

namespace gibbsflow {

/// Philox4x32-10 block function (Salmon et al., Random123).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter counter, Key key) noexcept;
};

/// Stream identity: key = root seed, upper counter words = stream index.
///
/// A block is addressed by (lane, block): counter = {block, lane, lo32(stream), hi32(stream)}.
/// Lanes below 2^31 are reserved for site-keyed Brownian increments (lane = site_key);
/// StreamEngine uses lanes with the top bit set.
struct SeedStream {
  std::uint64_t root_seed = 0;
  std::uint64_t stream_index = 0;

  Philox4x32::Counter block(std::uint32_t lane, std::uint32_t block_index) const noexcept;
  /// Two independent N(0,1) draws from one block (Box-Muller on two 53-bit uniforms).
  std::array<double, 2> normal_pair(std::uint32_t lane, std::uint32_t block_index) const noexcept;

  friend bool operator==(const SeedStream&, const SeedStream&) = default;
};

/// Uniform in the open interval (0, 1) from two 32-bit words.
double uniform_open(std::uint32_t hi, std::uint32_t lo) noexcept;

/// Injective 31-bit key of a site with coordinates in [-512, 511].
std::uint32_t site_key(const Site& site);

/// Stream index for item `item` of the work family `tag`: (mix32(tag) << 32) | item.
std::uint64_t derive_stream_index(std::uint64_t tag, std::uint64_t item);

/// Combines labels into a 64-bit tag (splitmix64 chain).
std::uint64_t mix_tag(std::uint64_t a, std::uint64_t b);

/// Sequential generator over one SeedStream; satisfies UniformRandomBitGenerator.
class StreamEngine {
 public:
  using result_type = std::uint32_t;

  explicit StreamEngine(SeedStream stream) : stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();
  double uniform();
  double normal();

 private:
  void refill();

  SeedStream stream_;
  std::uint64_t next_block_ = 0;
  Philox4x32::Counter buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gibbsflow
