#pragma once
#include <cstdint>

namespace gradflow {

// splitmix64 stream; algorithm name is echoed into config.resolved so runs
// can be reproduced across platforms.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform draw in the open interval (0, 1)
  double uniform() {
    return static_cast<double>((next() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  // derive the seed of an independent sub-stream (splittable use)
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 g(seed ^ (0x632be59bd9b4e019ull * (stream + 1)));
    return g.next();
  }
};

}  // namespace gradflow
