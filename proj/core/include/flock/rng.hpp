#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace flock {

// Seed derivation tree
// --------------------
// Every random stream in a run is derived from one 64-bit base seed with
// derive_seed(parent, tag) = mix64(parent ^ mix64(tag + kGolden)), where
// mix64 is the SplitMix64 finalizer. The derivation is pure integer
// arithmetic, so any implementation reproduces the same streams:
//
//   run_seed(i)      = derive_seed(base_seed, i)                 seed index i
//   truth            = derive_seed(run_seed, tag::kTruth)
//   train data of n  = derive_seed(derive_seed(run_seed, tag::kTrainData), n)
//   test data of n   = derive_seed(derive_seed(run_seed, tag::kTestData), n)
//   oracle test set  = derive_seed(run_seed, tag::kOracle)
//   role assignment  = derive_seed(run_seed, tag::kAssignment)
//   round r          = derive_seed(derive_seed(run_seed, tag::kRounds), r)
//   selection        = derive_seed(round_seed, tag::kSelection)
//   node n in round  = derive_seed(derive_seed(round_seed, tag::kNodeAction), n)

__extension__ using Uint128 = unsigned __int128;

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept {
  return mix64(parent ^ mix64(tag + kGolden));
}

namespace tag {
inline constexpr std::uint64_t kTruth = 0x7472757468ULL;
inline constexpr std::uint64_t kTrainData = 0x747261696eULL;
inline constexpr std::uint64_t kTestData = 0x74657374ULL;
inline constexpr std::uint64_t kOracle = 0x6f7261636c65ULL;
inline constexpr std::uint64_t kAssignment = 0x61737369676eULL;
inline constexpr std::uint64_t kRounds = 0x726f756e64ULL;
inline constexpr std::uint64_t kSelection = 0x73656c656374ULL;
inline constexpr std::uint64_t kNodeAction = 0x616374696f6eULL;
}  // namespace tag

/// SplitMix64 generator with portable distributions.
///
/// The standard library's distributions are implementation-defined, so the
/// uniform and normal draws are spelled out here to keep runs bit-identical
/// across toolchains.
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next_u64() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  /// Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    Uint128 m = static_cast<Uint128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<Uint128>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sigma) noexcept { return mean + sigma * normal(); }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace flock
