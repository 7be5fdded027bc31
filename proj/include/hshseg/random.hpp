#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace hshseg {

/// Portable seeded generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are not portable across library
/// implementations, so the integer and real draws are defined here:
///
///  - uniform_index(n): rejection sampling, accept x < 2^64 - (2^64 mod n),
///    return x mod n.
///  - uniform_unit(): (x >> 11) * 2^-53, a value in [0, 1).
///  - uniform(a, b): a + uniform_unit() * (b - a).
///
/// Every random choice in the library goes through this class, so any seed
/// produces the same tables, scenes and masks on every platform.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // 2^64 mod n computed without overflow.
    const std::uint64_t reject = (0 - n) % n;
    const std::uint64_t limit = 0 - reject;  // 2^64 - reject, modulo 2^64
    for (;;) {
      const std::uint64_t x = engine_();
      if (reject == 0 || x < limit) return x % n;
    }
  }

  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    uniform_index(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double uniform_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + uniform_unit() * (b - a); }

  bool bernoulli(double p) { return uniform_unit() < p; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finaliser; derives independent sub-stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of sub-stream `stream` under master seed `seed`.
constexpr std::uint64_t substream_seed(std::uint64_t seed,
                                       std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ (stream * 0xD1B54A32D192ED03ULL));
}

}  // namespace hshseg
