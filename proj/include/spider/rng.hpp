#pragma once

// Counter-based 64-bit random numbers.
//
// Draw k of stream `seed` is splitmix64_mix(seed + (k + 1) * kGolden). Every
// value is addressable by (seed, k) alone, so results never depend on how
// work is scheduled and an independent reimplementation is a few lines.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace spider {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t counter_draw(std::uint64_t seed, std::uint64_t k) noexcept {
  return splitmix64_mix(seed + (k + 1) * kGolden);
}

/// Uniform double in the open interval (0, 1).
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t k) noexcept {
  return (static_cast<double>(counter_draw(seed, k) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller using draws 2n and 2n+1 (cosine branch only).
inline double counter_normal(std::uint64_t seed, std::uint64_t n) noexcept {
  const double u1 = counter_uniform(seed, 2 * n);
  const double u2 = counter_uniform(seed, 2 * n + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Derives an independent child seed, e.g. one per sample index.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  return splitmix64_mix(seed ^ splitmix64_mix(salt + kGolden));
}

/// Sequential stream over the counter generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t next() noexcept { return counter_draw(seed_, counter_++); }

  double uniform() noexcept { return counter_uniform(seed_, counter_++); }

  /// Uniform integer in [0, n) by rejection; n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
      const std::uint64_t v = next();
      if (v < limit) return v % n;
    }
  }

  /// Uniform integer in [lo, hi].
  int between(int lo, int hi) noexcept {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool chance(double p) noexcept { return uniform() < p; }

  /// Index drawn proportionally to non-negative weights (at least one positive).
  std::size_t weighted(std::span<const double> weights) noexcept {
    double total = 0.0;
    for (double w : weights) total += w;
    double r = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (r < weights[i]) return i;
      r -= weights[i];
    }
    for (std::size_t i = weights.size(); i-- > 0;) {
      if (weights[i] > 0) return i;
    }
    return 0;
  }

  template <typename T>
  const T& pick(const std::vector<T>& items) noexcept {
    return items[below(items.size())];
  }

  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace spider
