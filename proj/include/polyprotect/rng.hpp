#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>

namespace polyprotect {

/// FNV-1a over a byte string. Used to derive per-subject random streams from
/// labels; stable across platforms and standard-library implementations
/// (unlike std::hash).
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Combines seed components into one stream seed. Streams derived from
/// different component tuples are statistically independent.
constexpr std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8f1b0bdc3f5a2c47ull;
  for (std::uint64_t p : parts) {
    h = detail::splitmix64(h ^ p);
  }
  return h;
}

/// Deterministic random stream. The engine is mt19937_64 (bit-exact per the
/// standard); all value transforms are implemented here rather than with
/// std::*_distribution, whose outputs are implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53 random bits.
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    for (;;) {
      const std::uint64_t u = engine_();
      if (u < limit) return u % n;
    }
  }

  /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double next_gaussian() {
    const double u1 =
        (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_unit();                                 // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace polyprotect
