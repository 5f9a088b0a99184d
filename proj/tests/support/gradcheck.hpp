#ifndef IQALS_TESTS_GRADCHECK_HPP
#define IQALS_TESTS_GRADCHECK_HPP

// Central finite differences for double-precision gradient checks.
//
// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor):
// the floor keeps exactly-zero gradients (dead ReLUs, non-maximal pool
// inputs) from dividing by zero while still flagging any absolute error
// above floor * tolerance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "iqals/rng.hpp"

namespace iqals::testing {

inline constexpr double kFdStep = 1e-6;
inline constexpr double kFdFloor = 1e-6;
inline constexpr double kFdTolerance = 1e-3;

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kFdFloor});
  return std::abs(analytic - numeric) / scale;
}

struct GradCheckResult {
  std::size_t checked = 0;
  double worst = 0.0;
  std::size_t worst_index = 0;

  bool passed() const { return checked > 0 && worst < kFdTolerance; }
};

// Up to `samples` indices of a tensor with `size` entries: all of them when
// the tensor is small, otherwise a seeded random subset.
inline std::vector<std::size_t> sample_indices(std::size_t size, std::size_t samples,
                                               std::uint64_t seed) {
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  if (size <= samples) return idx;
  Rng rng(seed);
  rng.shuffle(std::span(idx));
  idx.resize(samples);
  return idx;
}

// Perturbs values[i] in place, evaluates f on both sides and compares with
// analytic[i].
inline GradCheckResult check_gradient(std::span<double> values, std::span<const double> analytic,
                                      const std::function<double()>& f, std::size_t samples = 200,
                                      std::uint64_t seed = 1) {
  GradCheckResult r;
  for (std::size_t i : sample_indices(values.size(), samples, seed)) {
    const double saved = values[i];
    values[i] = saved + kFdStep;
    const double up = f();
    values[i] = saved - kFdStep;
    const double down = f();
    values[i] = saved;
    const double numeric = (up - down) / (2 * kFdStep);
    const double err = relative_error(analytic[i], numeric);
    if (err > r.worst) {
      r.worst = err;
      r.worst_index = i;
    }
    ++r.checked;
  }
  return r;
}

}  // namespace iqals::testing

#endif  // IQALS_TESTS_GRADCHECK_HPP
