#pragma once

#include <cstdint>

// Deterministic RNG built on the splitmix64 finalizer. Streams are derived
// from (master seed, stream tag, element index), so any trial's randomness
// can be reproduced in isolation and thread partitioning cannot change it.
// std::uniform_real_distribution is implementation-defined and is avoided.

namespace bellsim {

inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                           std::uint64_t index) {
  std::uint64_t s = mix64(master + kGolden * (stream + 1));
  return mix64(s + kGolden * (index + 1));
}

// Stream tags. Values are part of the reproducibility contract: changing
// them changes every simulated data set.
enum : std::uint64_t {
  kStreamSource = 1,
  kStreamSchedule = 2,
  kStreamEmission = 3,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be >= 1; rejection keeps it unbiased.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x > limit);
    return x % n;
  }

 private:
  std::uint64_t state_;
};

}  // namespace bellsim
