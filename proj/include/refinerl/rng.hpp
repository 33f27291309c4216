#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace refinerl {

// All randomness in this project flows through one documented generator so
// that runs (and ports to other languages) reproduce bit-exactly:
//
//   * splitmix64(x) is the finalizer of the SplitMix64 generator:
//       z = x + 0x9E3779B97F4A7C15
//       z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//       z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//       return z ^ (z >> 31)
//   * Rng is xoshiro256** seeded by four successive SplitMix64 outputs.
//   * derive_seed(seed, stream) = splitmix64(seed + (stream+1) * GOLDEN),
//     i.e. the (stream+1)-th output of a SplitMix64 sequence started at
//     `seed`. Sub-streams (evaluation episodes, environment resets, ...)
//     are derived this way so adding streams never shifts existing ones.
//   * next_double() = (next_u64() >> 11) * 2^-53, uniform in [0, 1).
//   * normal() uses the Box-Muller transform and always consumes exactly
//     two uniforms per call (the sine branch is discarded), keeping the
//     stream position independent of call history.

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + kGoldenGamma;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed + stream * kGoldenGamma);
}

class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) {
      sm += kGoldenGamma;
      word = splitmix64(sm - kGoldenGamma);
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

  // Index in [0, n). Uses the double path so the draw order is identical in
  // any port that only implements next_double().
  std::uint64_t next_index(std::uint64_t n) {
    const auto idx = static_cast<std::uint64_t>(next_double() * static_cast<double>(n));
    return idx < n ? idx : n - 1;
  }

  double normal(double mean, double stddev) {
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * radius * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::array<std::uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace refinerl
