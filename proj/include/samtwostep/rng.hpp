#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace samtwostep {

// splitmix64 finalizer; used to derive independent substreams from
// (seed, purpose, index) triples so replications can run in any order.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t purpose,
                                   std::uint64_t index) {
  return mix64(mix64(seed ^ mix64(purpose)) ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t purpose,
                                std::uint64_t index) {
  return std::mt19937_64(derive_stream(seed, purpose, index));
}

// Uniform in [0,1). 53-bit mantissa from the top bits of the generator.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, bound) via Lemire's multiply-shift rejection.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  __uint128_t m = static_cast<__uint128_t>(rng()) * bound;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < bound) {
    std::uint64_t threshold = (-bound) % bound;
    while (lo < threshold) {
      m = static_cast<__uint128_t>(rng()) * bound;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

// Standard normal via polar Box-Muller; one spare value cached per call pair
// is deliberately not kept so draws are a pure function of the stream state.
inline double standard_normal(std::mt19937_64& rng) {
  for (;;) {
    double u = 2.0 * uniform01(rng) - 1.0;
    double v = 2.0 * uniform01(rng) - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

template <typename It>
void shuffle_indices(It first, It last, std::mt19937_64& rng) {
  auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    std::uint64_t j = uniform_below(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace samtwostep
