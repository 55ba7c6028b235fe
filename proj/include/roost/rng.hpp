#pragma once

#include <bit>
#include <cstdint>

namespace roost {

/// SplitMix64 splittable generator (Steele, Lea & Flood, "Fast splittable
/// pseudorandom number generators", OOPSLA 2014), bit-compatible with
/// java.util.SplittableRandom.
///
/// A generator is a (seed, gamma) pair. Each call advances the seed by gamma
/// and returns the finalizer-mixed seed. split() draws a fresh (seed, gamma)
/// for a child stream that shares no state with its parent afterwards.
class SplittableRng {
 public:
  static constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

  constexpr explicit SplittableRng(std::uint64_t seed) noexcept
      : SplittableRng(seed, kGoldenGamma) {}

  constexpr SplittableRng(std::uint64_t seed, std::uint64_t gamma) noexcept
      : seed_(seed), gamma_(gamma | 1ULL) {}

  constexpr std::uint64_t next_u64() noexcept { return mix64(next_seed()); }

  /// Top 53 bits of next_u64() scaled by 2^-53, in [0, 1).
  constexpr double next_unit_f64() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  constexpr SplittableRng split() noexcept {
    const std::uint64_t child_seed = next_u64();
    return SplittableRng(child_seed, mix_gamma(next_seed()));
  }

  constexpr std::uint64_t seed() const noexcept { return seed_; }
  constexpr std::uint64_t gamma() const noexcept { return gamma_; }

  friend constexpr bool operator==(const SplittableRng&, const SplittableRng&) = default;

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t mix_gamma(std::uint64_t z) noexcept {
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    z = (z ^ (z >> 33)) | 1ULL;
    const int transitions = std::popcount(z ^ (z >> 1));
    return transitions < 24 ? z ^ 0xaaaaaaaaaaaaaaaaULL : z;
  }

 private:
  constexpr std::uint64_t next_seed() noexcept { return seed_ += gamma_; }

  std::uint64_t seed_;
  std::uint64_t gamma_;
};

inline constexpr SplittableRng new_rng(std::uint64_t seed) noexcept { return SplittableRng(seed); }

/// Stream derived purely from (seed, key1, key2). Two workers holding the same
/// arguments obtain the same stream without communicating.
inline constexpr SplittableRng keyed_rng(std::uint64_t seed, std::uint64_t key1,
                                         std::uint64_t key2) noexcept {
  std::uint64_t z = SplittableRng::mix64(seed + SplittableRng::kGoldenGamma);
  z = SplittableRng::mix64(z ^ key1);
  z = SplittableRng::mix64(z ^ key2);
  return SplittableRng(z);
}

}  // namespace roost
