#include "gibbsflow/random.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
constexpr std::uint32_t kEngineLaneBit = 0x80000000u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Philox4x32::Counter Philox4x32::apply(Counter c, Key k) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

Philox4x32::Counter SeedStream::block(std::uint32_t lane, std::uint32_t block_index) const noexcept {
  const Philox4x32::Key key{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32)};
  return Philox4x32::apply({block_index, lane, static_cast<std::uint32_t>(stream_index),
                            static_cast<std::uint32_t>(stream_index >> 32)},
                           key);
}

double uniform_open(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (static_cast<std::uint64_t>(lo) >> 11);
  return (static_cast<double>(bits & ((1ull << 53) - 1)) + 0.5) * 0x1.0p-53;
}

std::array<double, 2> SeedStream::normal_pair(std::uint32_t lane, std::uint32_t block_index) const noexcept {
  const auto w = block(lane, block_index);
  const double u1 = uniform_open(w[0], w[1]);
  const double u2 = uniform_open(w[2], w[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

std::uint32_t site_key(const Site& site) {
  std::uint32_t key = 0;
  for (int k = 0; k < kMaxDim; ++k) {
    const int c = k < site.dim() ? site[k] : 0;
    if (c < -512 || c > 511) throw DomainError(fmt::format("site ({}) outside the keyed range [-512, 511]", site.to_string()));
    key = (key << 10) | static_cast<std::uint32_t>(c + 512);
  }
  return key;  // 30 bits
}

std::uint64_t mix_tag(std::uint64_t a, std::uint64_t b) { return splitmix64(splitmix64(a) ^ b); }

std::uint64_t derive_stream_index(std::uint64_t tag, std::uint64_t item) {
  if (item > 0xFFFFFFFFull) throw DomainError("stream item index exceeds 32 bits");
  const std::uint64_t hi = splitmix64(tag) & 0xFFFFFFFFull;
  return (hi << 32) | item;
}

void StreamEngine::refill() {
  const auto lane = kEngineLaneBit | static_cast<std::uint32_t>(next_block_ >> 32);
  buffer_ = stream_.block(lane, static_cast<std::uint32_t>(next_block_));
  ++next_block_;
  buffered_ = 4;
}

StreamEngine::result_type StreamEngine::operator()() {
  if (buffered_ == 0) refill();
  return buffer_[static_cast<std::size_t>(4 - buffered_--)];
}

double StreamEngine::uniform() {
  const std::uint32_t hi = (*this)();
  const std::uint32_t lo = (*this)();
  return uniform_open(hi, lo);
}

double StreamEngine::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

}  // namespace gibbsflow
