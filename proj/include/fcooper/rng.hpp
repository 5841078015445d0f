#pragma once

#include <cstdint>

namespace fcooper {

// splitmix64. All seeded behavior in the library (weight init, voxel
// sampling, scene jitter, loss draws) goes through this generator so a
// run reproduces bit-for-bit on any platform.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform in [0, 1), 24-bit resolution
  float next_unit_f() { return static_cast<float>(next() >> 40) * 0x1.0p-24f; }

  // uniform integer in [0, n); n > 0
  uint64_t bounded(uint64_t n) { return next() % n; }

 private:
  uint64_t state_;
};

// stable seed mixing for derived streams (per-voxel sampling, per-round
// loss draws, ...)
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  return z ^ (z >> 31);
}

}  // namespace fcooper
