#pragma once

#include <cmath>
#include <cstdint>

namespace dtm {

/// Stateless counter-based random numbers.
///
/// Every draw is a pure function of a key (seed) and a counter tuple, so the
/// value a chain/node/sweep sees never depends on scheduling or thread count.
/// The mixer is the SplitMix64 finalizer applied in a keyed cascade.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                               std::uint64_t d = 0) const {
    std::uint64_t z = mix(key_ ^ a);
    z = mix(z ^ b);
    z = mix(z ^ c);
    return mix(z ^ d);
  }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                 std::uint64_t d = 0) const {
    return static_cast<double>(bits(a, b, c, d) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), n > 0 (multiply-shift, bias < 2^-32 for n < 2^32).
  std::uint64_t below(std::uint64_t n, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0, std::uint64_t d = 0) const {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits(a, b, c, d)) * n) >> 64);
  }

  /// Standard normal via Box-Muller on two decorrelated draws.
  double normal(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    double u1 = uniform(a, b, c, 0x5bd1e995ULL);
    const double u2 = uniform(a, b, c, 0x1b873593ULL);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

/// Derives an independent seed for a named sub-stream.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag,
                                    std::uint64_t index = 0) {
  return CounterRng::mix(CounterRng::mix(seed ^ CounterRng::mix(tag)) ^ index);
}

}  // namespace dtm
