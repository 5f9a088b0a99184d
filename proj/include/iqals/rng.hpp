#ifndef IQALS_RNG_HPP
#define IQALS_RNG_HPP

// Random number generation shared by every seeded component.
//
// Algorithm "iqals-rng v1":
//   * seeds are combined with SplitMix64 (`mix_seed`), so per-sample seeds are
//     a pure function of (base seed, stream ids...);
//   * streams are std::mt19937_64, whose output sequence is fixed by the C++
//     standard;
//   * uniform doubles take the top 53 bits: (u >> 11) * 2^-53, in [0, 1);
//   * normal variates use the Box-Muller transform on a pair of uniforms,
//     z0 = sqrt(-2 ln(1 - u1)) cos(2 pi u2), z1 = ... sin(2 pi u2), consumed
//     in that order;
//   * shuffles are a Fisher-Yates walk from the back using `uniform_index`.
// Standard library distributions are avoided because their output is
// implementation-defined.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>
#include <utility>

namespace iqals {

inline constexpr const char* kRngVersion = "iqals-rng v1 (splitmix64 + mt19937_64 + box-muller)";

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6A09E667F3BCC908ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Truncated normal: redraw until |z| <= 2.
  double truncated_normal() {
    for (;;) {
      const double z = normal();
      if (std::abs(z) <= 2.0) return z;
    }
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace iqals

#endif  // IQALS_RNG_HPP
