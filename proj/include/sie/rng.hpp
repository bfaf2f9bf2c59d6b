#pragma once

#include <cstdint>

namespace sie {

/**
 * @brief SplitMix64 generator (Steele, Lea, Flood 2014).
 *
 * The constants are pinned so that seeded streams replay bit-identically on every platform:
 *   increment  0x9E3779B97F4A7C15
 *   mix        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
 *              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
 *              z =  z ^ (z >> 31)
 * The n-th output (1-based) of a stream seeded with s is mix(s + n * increment), which gives
 * random access without carrying state.
 */
class SplitMix64 {
 public:
  static constexpr std::uint64_t kIncrement = 0x9E3779B97F4A7C15ULL;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// n-th output (1-based) of the stream seeded with `seed`.
  static constexpr std::uint64_t at(std::uint64_t seed, std::uint64_t n) noexcept {
    return mix(seed + n * kIncrement);
  }

  constexpr std::uint64_t next() noexcept {
    state_ += kIncrement;
    return mix(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept { return to_unit(next()); }

  double normal() noexcept;

  static constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

/// Child seed for (seed, a, b), e.g. (sweep seed, cell, trial).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return SplitMix64::mix(SplitMix64::mix(seed ^ SplitMix64::mix(a + 0x632BE59BD9B4E019ULL)) +
                         SplitMix64::mix(b + 0x2545F4914F6CDD1DULL));
}

}  // namespace sie
