#pragma once

#include <cstdint>
#include <cmath>

namespace ttrl {

// Deterministic xoshiro256++ generator. Used instead of <random> engines so
// that draws are bit-identical across platforms and standard library versions.
class Rng {
 public:
  Rng() : Rng(0x9e3779b97f4a7c15ULL) {}

  explicit Rng(std::uint64_t seed) {
    // Expand the seed through splitmix64 so near-equal seeds give
    // uncorrelated states.
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 bits of randomness.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be >= 1.
  std::uint64_t next_below(std::uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Exponential with mean 1.
  double next_exponential() {
    return -std::log1p(-next_double());
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4];
};

// Purpose tags for derived rng streams. Every random decision in the system
// draws from a stream keyed by (seed, tag, a, b), so any part of a run can be
// reproduced in isolation and concurrent execution cannot perturb results.
enum class StreamTag : std::uint64_t {
  kDataset = 1,
  kVotes = 2,
  kRollout = 3,
  kBaseline = 4,
  kShuffle = 5,
  kRefresh = 6,
};

inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  std::uint64_t x = seed;
  std::uint64_t h = Rng::splitmix64(x);
  x ^= static_cast<std::uint64_t>(tag) + 0x632be59bd9b4e019ULL;
  h ^= Rng::splitmix64(x);
  x ^= a + 0x2545f4914f6cdd1dULL;
  h ^= Rng::splitmix64(x);
  x ^= b + 0x9e3779b97f4a7c15ULL;
  h ^= Rng::splitmix64(x);
  return Rng(h);
}

}  // namespace ttrl
