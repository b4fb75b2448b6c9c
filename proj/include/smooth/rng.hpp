#pragma once

#include <cmath>
#include <cstdint>

namespace smooth::rng {

// Counter-based pseudo-randomness: every value is a pure function of
// (key, index). No shared state, so parallel evaluation order cannot
// change results and unused draws never shift other streams.

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives a child stream key from a parent key and up to three words.
inline std::uint64_t derive(std::uint64_t key, std::uint64_t a, std::uint64_t b = 0,
                            std::uint64_t c = 0) {
  std::uint64_t h = mix64(key ^ 0xD1B54A32D192ED03ULL);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return h;
}

inline std::uint64_t bits(std::uint64_t key, std::uint64_t index) {
  return mix64(key + index * 0x9E3779B97F4A7C15ULL);
}

/// Uniform double in (0, 1]; never returns 0 so log() stays finite.
inline double uniform01(std::uint64_t key, std::uint64_t index) {
  return static_cast<double>((bits(key, index) >> 11) + 1) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform(std::uint64_t key, std::uint64_t index, double lo, double hi) {
  const double u = static_cast<double>(bits(key, index) >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

/// Standard normal via Box-Muller on two counter-derived uniforms.
inline double gaussian(std::uint64_t key, std::uint64_t index) {
  const double u1 = uniform01(key, 2 * index);
  const double u2 = uniform01(key, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Uniform integer in [0, n).
inline std::uint64_t below(std::uint64_t key, std::uint64_t index, std::uint64_t n) {
  return bits(key, index) % n;
}

}  // namespace smooth::rng
