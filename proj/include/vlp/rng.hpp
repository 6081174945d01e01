#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace vlp::rng {

// Counter-based Gaussian streams: every draw is a pure function of
// (seed, stream index), so results never depend on evaluation order.

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a tuple of counters (trial, led, sample, ...) into one stream index.
constexpr std::uint64_t stream_index(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Uniform double in (0, 1], 53-bit resolution.
inline double uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t lane = 0) noexcept {
  const std::uint64_t bits = mix64(mix64(seed) ^ mix64(index + 0x2545f4914f6cdd1dULL * (lane + 1)));
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal draw via Box-Muller.
inline double standard_normal(std::uint64_t seed, std::uint64_t index) noexcept {
  const double u1 = uniform(seed, index, 0);
  const double u2 = uniform(seed, index, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace vlp::rng
