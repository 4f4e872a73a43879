#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace etd {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; the basis for all substream seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

/// Derives an independent stream seed from (master, component name, index).
std::uint64_t substream_seed(std::uint64_t master, std::string_view component,
                             std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::string_view component, std::uint64_t index = 0) {
  return Rng(substream_seed(master, component, index));
}

inline double uniform_real(Rng& rng) {
  // 53-bit mantissa draw in [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1p-53;
}

inline double normal(Rng& rng, double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  return dist(rng);
}

/// Uniform integer in [lo, hi], inclusive.
inline int uniform_int(Rng& rng, int lo, int hi) {
  std::uniform_int_distribution<int> dist(lo, hi);
  return dist(rng);
}

}  // namespace etd
