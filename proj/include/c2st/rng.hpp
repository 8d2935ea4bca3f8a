#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>

namespace c2st {

// Counter-based generator. The i-th output of stream (seed, stream_id) is
//
//   mix64(key + i * 0x9E3779B97F4A7C15),  key = mix64(seed ^ mix64(stream_id + 0x632BE59BD9B4E019))
//
// where mix64 is the SplitMix64 finalizer. Any output can be recomputed from
// (seed, stream_id, i) alone, so parallel workers never share mutable state:
// each unit of work gets its own stream id.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform on (0, 1).
  double uniform_open() noexcept;
  // Standard normal by Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

// FNV-1a of a purpose tag ("train", "test", "perm", ...).
std::uint64_t tag_hash(std::string_view tag) noexcept;

// Child seed for a path of integers below a base seed:
//   s_0 = mix64(base), s_{j+1} = mix64(s_j ^ (path_j + 0x9E3779B97F4A7C15 * (j + 1))).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept;

// In-place Fisher-Yates using rng.below, identical on every platform.
template <class T>
void shuffle(std::span<T> items, CounterRng& rng) noexcept {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace c2st
