// Counter-based pseudo-random generator ("splitmix64-counter v1").
//
// The i-th output is mix64(seed + i * GOLDEN), the SplitMix64 finalizer
// applied to a strided counter. There is no hidden state beyond (seed,
// counter), so streams can be split deterministically: derive(k) hashes
// (seed, k) through a domain-separated second mix. Every draw is pure
// 64-bit integer arithmetic followed by fixed double operations, so a
// given (seed, draw sequence) reproduces bit-identically everywhere.

#pragma once

#include <cmath>
#include <cstdint>

#include "censdr/normal.hpp"

namespace censdr {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t next_u64() {
    static constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
    ++counter_;
    return detail::mix64(seed_ + golden * counter_);
  }

  // Child generator for stream k; independent of this stream's position.
  CounterRng derive(std::uint64_t k) const {
    static constexpr std::uint64_t stream_tag = 0xD1B54A32D192ED03ULL;
    std::uint64_t child = detail::mix64(seed_ ^ detail::mix64(k + stream_tag));
    return CounterRng(child);
  }

  // Uniform on (0,1): 53 random bits, offset by half an ulp so 0 and 1
  // are never produced.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Standard normal by inverse-cdf; avoids Box-Muller's pairing state.
  double normal() { return normal_quantile(uniform01()); }

  // Exponential with rate 1.
  double exponential() { return -std::log(uniform01()); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace censdr
