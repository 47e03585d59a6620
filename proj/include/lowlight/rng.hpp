#pragma once

#include <cstdint>

namespace lowlight {

/// SplitMix64 finalizer. Bit-exact on every platform with 64-bit unsigned
/// arithmetic; used both as a sequential generator and as a counter-based
/// hash so per-pixel draws do not depend on evaluation order.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// 53-bit uniform on [0, 1).
constexpr double to_unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform draw on [0, 1) for stream `seed`, element `counter`.
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  return to_unit_double(splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632BE59BD9B4E019ULL)));
}

/// Sequential SplitMix64 stream.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr double uniform() { return to_unit_double(next()); }

  /// Unbiased integer in [0, bound) by rejection.
  constexpr std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= limit) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace lowlight
