#pragma once

#include <cstdint>
#include <random>

namespace upacrl {

// Stream tags keep the random draws of independent consumers apart even when
// they share a seed and a round index.
enum class StreamTag : std::uint64_t {
  kDecisionSet = 1,
  kNoise = 2,
  kTieBreak = 3,
  kTransition = 4,
  kInstance = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Engine for the `index`-th draw group of stream `tag` under `seed`. A pure
/// function of its arguments, so any round can be replayed in isolation.
inline std::mt19937_64 make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  h = splitmix64(h ^ index);
  return std::mt19937_64(h);
}

}  // namespace upacrl
