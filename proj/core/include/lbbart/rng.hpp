#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lbbart {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent stream `stream` of the master seed. Streams are keyed by
// (seed, stream) only, so adding chains never shifts existing ones.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = mix64(seed ^ mix64(stream + 0x51ed270b27a3c5a1ULL));
  const std::uint64_t b = mix64(a + stream);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

// Reserved stream ids for non-chain randomness.
inline constexpr std::uint64_t kDataStream = 0xDA7A0000ULL;
inline constexpr std::uint64_t kPriorStudyStream = 0x9810A000ULL;
inline constexpr std::uint64_t kSubsampleStream = 0x5AB50000ULL;

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer on [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double standard_normal(Rng& rng) {
  // Polar Box-Muller without cached state, so each call consumes a fixed
  // pattern of draws regardless of history.
  double u, v, s;
  do {
    u = 2.0 * uniform01(rng) - 1.0;
    v = 2.0 * uniform01(rng) - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

inline double gamma_draw(Rng& rng, double shape, double scale) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

inline double beta_draw(Rng& rng, double a, double b) {
  const double x = gamma_draw(rng, a, 1.0);
  const double y = gamma_draw(rng, b, 1.0);
  return x / (x + y);
}

}  // namespace lbbart
