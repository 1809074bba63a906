#pragma once

// Portable deterministic draws. The standard distributions are
// implementation-defined, so everything seeded goes through these helpers.

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace xqsv {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  // splitmix64 of (seed, stream) so nearby seeds give unrelated streams
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return Rng(z ^ (z >> 31));
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Index drawn proportionally to non-negative weights.
template <typename Weights>
std::size_t sample_index(const Weights& weights, Rng& rng) {
  double total = 0;
  for (auto w : weights) total += static_cast<double>(w);
  double u = uniform01(rng) * total;
  std::size_t last = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(weights.size()); ++i) {
    const double w = static_cast<double>(weights[i]);
    if (w <= 0) continue;
    last = i;
    if (u < w) return i;
    u -= w;
  }
  return last;
}

}  // namespace xqsv
