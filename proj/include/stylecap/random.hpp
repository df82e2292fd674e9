#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stylecap {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Per-item stream: a function of (seed, key) only, so results do not depend on
// the order in which items are processed.
inline Rng stream_for(std::uint64_t seed, std::string_view key) {
  return Rng(mix_seed(seed ^ mix_seed(fnv1a64(key))));
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace stylecap
