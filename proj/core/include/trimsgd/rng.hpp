#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace trimsgd {

/// SplitMix64 (Steele, Lea, Flood). Used only to expand seeds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  std::uint64_t next() noexcept;

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman, Vigna), seeded by four SplitMix64 outputs.
///
/// All randomness in the toolkit flows through this generator and the two
/// helpers below, so every draw sequence replays identically on any
/// platform. Do not substitute std:: distributions: their algorithms are
/// implementation-defined.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;

  // Uniform on [0, 1) with 53 random bits: (next() >> 11) * 2^-53.
  double uniform01() noexcept;

  // Uniform on {0, ..., bound-1}; Lemire's multiply-and-reject, unbiased.
  // bound must be non-zero.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept;

 private:
  std::uint64_t s_[4];
};

/// Independent child seed for a named stream. Pure function of its inputs.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

// Stream tags used when deriving per-purpose seeds from a trial seed.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kNoiseStream = 2;
inline constexpr std::uint64_t kBatchStream = 3;
inline constexpr std::uint64_t kHistogramStream = 4;

/// Fisher-Yates permutation of {0..n-1}, drawing from high index to low.
std::vector<std::size_t> random_permutation(std::size_t n, Xoshiro256& rng);

}  // namespace trimsgd
