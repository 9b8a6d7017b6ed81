#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

// Seed derivation for reproducible, independent streams.
//
// stream seed = splitmix64 chain over (base seed, fnv1a64(experiment id),
// replicate, role). Each stream drives a std::mt19937_64.

namespace medfb {

using Rng = std::mt19937_64;

inline constexpr std::string_view kRngDescription = "std::mt19937_64; splitmix64(base, fnv1a64(id), replicate, role)";

enum class StreamRole : std::uint64_t { env = 1, learner = 2 };

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view experiment_id,
                                           std::uint64_t replicate, StreamRole role) {
  std::uint64_t s = splitmix64(base);
  s = splitmix64(s ^ fnv1a64(experiment_id));
  s = splitmix64(s ^ replicate);
  return splitmix64(s ^ static_cast<std::uint64_t>(role));
}

/// Uniform draw in [0, 1).
inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Inverse-CDF categorical draw; zero-probability entries are never returned.
inline std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace medfb
