#pragma once

#include <cstdint>

namespace heareq {

// Counter-derived random streams. Every stream is keyed by (seed, lane
// indices), so the draws for subject k are the same no matter how many
// subjects a run generates or in which order they are rendered.
//
// The generator is a SplitMix64 walk from a mixed key. All floating draws
// go through uniform(), which maps the top 53 bits onto [0, 1); nothing
// here depends on library distribution objects, so output is identical
// across standard libraries and platforms.
class SeedStream {
public:
  explicit SeedStream(std::uint64_t seed, std::uint64_t lane0 = 0,
                      std::uint64_t lane1 = 0, std::uint64_t lane2 = 0) {
    state_ = finalize(seed + 0x9e3779b97f4a7c15ull);
    state_ = finalize(state_ ^ finalize(lane0 + 0xbf58476d1ce4e5b9ull));
    state_ = finalize(state_ ^ finalize(lane1 + 0x94d049bb133111ebull));
    state_ = finalize(state_ ^ finalize(lane2 + 0x2545f4914f6cdd1dull));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return finalize(state_);
  }

  // Uniform draw in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Symmetric draw in [-a, a].
  double jitter(double a) { return uniform(-a, a); }

private:
  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace heareq
