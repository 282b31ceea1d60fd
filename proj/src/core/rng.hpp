#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Keyed counter-style randomness. Every consumer owns a Stream derived from a
// 64-bit key; keys are derived, never shared, so concurrent consumers cannot
// interleave. All draws are pure functions of (key, position): results are
// bit-identical across runs and platforms.
namespace mixmatch::rng {

inline constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 output function. Bijective on 64 bits.
constexpr uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Child key from (key, salt). Two mixing rounds so that adjacent salts and
// adjacent keys land far apart.
constexpr uint64_t derive(uint64_t key, uint64_t salt) {
  return mix64(mix64(key ^ kGolden) + salt * kGolden);
}

// Fixed salts used across the project. Per-consumer, not per-call.
enum : uint64_t {
  kSaltSourceIndex = 1,  // mixture index draw inside one sample
  kSaltSourceBody = 2,   // feature/label draw inside one sample
  kSaltValidation = 3,   // suite validation-set generator
  kSaltNodeEval = 4,     // tree-search child evaluations
  kSaltStrategy = 5,     // coordinate-halving partition choices
  kSaltOptModel = 6,     // long-SGD optimal-model estimates
  kSaltMonteCarlo = 7,   // averaged-loss estimators
  kSaltIngest = 8,       // per-source shuffles during CSV ingestion
  kSaltHarness = 9,      // verification and experiment replica streams
  kSaltRefine = 10,      // post-search refinement SGD (split-budget variant)
};

class Stream {
 public:
  explicit Stream(uint64_t key) : state_(mix64(key + kGolden)) {}

  uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform on (0, 1]: never returns 0, safe under log().
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform on [0, 1).
  double next_unit_co() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal, Box-Muller cosine branch. Two u64 draws per value; no
  // cached second value, so the draw count per sample is fixed.
  double next_normal() {
    const double u1 = next_unit();
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased integer in [0, n). Rejection over the top of the range.
  uint64_t next_below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

 private:
  uint64_t state_;
};

}  // namespace mixmatch::rng
