#pragma once

// Random streams used throughout the library.
//
// The generator is SplitMix64 (Steele, Lea & Flood 2014). A stream is fully
// determined by a 64-bit key; sub-streams are derived by mixing the parent key
// with a 64-bit FNV-1a hash of a stage label, so every pipeline stage draws from
// its own independent sequence. Normal variates use the Box-Muller transform
// on two uniforms and consume exactly two raw draws each. Nothing here relies
// on std:: distributions, whose output is implementation-defined.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>

namespace sheaflab::rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Derives the key of a named child stream.
constexpr std::uint64_t derive(std::uint64_t key, std::string_view label) noexcept {
  return mix64(key ^ mix64(fnv1a(label)));
}

/// Derives the key of an indexed child stream.
constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t index) noexcept {
  return mix64(key + kGolden * (index + 1));
}

/// Maps 64 random bits to a double in [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Standard normal from two raw 64-bit draws.
inline double box_muller(std::uint64_t a, std::uint64_t b) noexcept {
  const double u1 = 1.0 - to_unit(a);  // (0, 1]
  const double u2 = to_unit(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

class Stream {
 public:
  explicit constexpr Stream(std::uint64_t key) noexcept : state_(key) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  double uniform() noexcept { return to_unit(next()); }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept {
    const std::uint64_t a = next();
    const std::uint64_t b = next();
    return box_muller(a, b);
  }

  /// Uniform integer in [0, bound) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= limit) return r % bound;
    }
  }

  /// Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

/// Counter-based normal: a pure function of (key, counters).
inline double normal_at(std::uint64_t key, std::uint64_t a, std::uint64_t b,
                        std::uint64_t c = 0) noexcept {
  const std::uint64_t base = mix64(mix64(mix64(key ^ a) + b) ^ (c * kGolden));
  return box_muller(mix64(base + kGolden), mix64(base + 2 * kGolden));
}

}  // namespace sheaflab::rng
