#ifndef IQALS_IQA_HPP
#define IQALS_IQA_HPP

// Full-reference SSIM on Rec. 601 luma in byte scale, 11x11 Gaussian window
// (sigma 1.5), valid window placement only; plus the score transform that
// maps it into (0, 1].

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "iqals/error.hpp"
#include "iqals/image.hpp"

namespace iqals {

inline constexpr double kQualityFloor = 1e-3;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimDynamicRange = 255.0;

struct QualityScore {
  double raw = 1.0;
  double transformed = 1.0;
};

// Identity on (floor, 1], clamped outside.
inline double transform_score(double raw) {
  if (std::isnan(raw)) return kQualityFloor;
  return std::clamp(raw, kQualityFloor, 1.0);
}

inline std::vector<double> ssim_window_1d() {
  std::vector<double> w(kSsimWindow);
  double sum = 0.0;
  const int r = kSsimWindow / 2;
  for (int i = -r; i <= r; ++i) {
    w[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[static_cast<std::size_t>(i + r)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Mean SSIM of two equally sized single-channel planes (row-major).
inline double ssim_plane(std::span<const double> a, std::span<const double> b, int width,
                         int height) {
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(width) * height) {
    throw ParameterError("ssim: planes differ in size");
  }
  if (width < kSsimWindow || height < kSsimWindow) {
    throw ParameterError("ssim: image smaller than the 11x11 window");
  }
  const auto w = ssim_window_1d();
  const int ow = width - kSsimWindow + 1;
  const int oh = height - kSsimWindow + 1;

  // Weighted moments via a horizontal then vertical valid-region pass.
  const std::size_t n = a.size();
  std::vector<double> moments[5] = {std::vector<double>(n), std::vector<double>(n),
                                    std::vector<double>(n), std::vector<double>(n),
                                    std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    moments[0][i] = a[i];
    moments[1][i] = b[i];
    moments[2][i] = a[i] * a[i];
    moments[3][i] = b[i] * b[i];
    moments[4][i] = a[i] * b[i];
  }
  std::vector<double> filtered[5];
  std::vector<double> row_pass(static_cast<std::size_t>(height * ow));
  for (int m = 0; m < 5; ++m) {
    const auto& src = moments[m];
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < kSsimWindow; ++k)
          s += w[static_cast<std::size_t>(k)] * src[static_cast<std::size_t>(y * width + x + k)];
        row_pass[static_cast<std::size_t>(y * ow + x)] = s;
      }
    filtered[m].assign(static_cast<std::size_t>(oh * ow), 0.0);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < kSsimWindow; ++k)
          s += w[static_cast<std::size_t>(k)] * row_pass[static_cast<std::size_t>((y + k) * ow + x)];
        filtered[m][static_cast<std::size_t>(y * ow + x)] = s;
      }
  }

  const double c1 = (0.01 * kSsimDynamicRange) * (0.01 * kSsimDynamicRange);
  const double c2 = (0.03 * kSsimDynamicRange) * (0.03 * kSsimDynamicRange);
  double total = 0.0;
  for (std::size_t i = 0; i < filtered[0].size(); ++i) {
    const double mu_a = filtered[0][i];
    const double mu_b = filtered[1][i];
    const double var_a = filtered[2][i] - mu_a * mu_a;
    const double var_b = filtered[3][i] - mu_b * mu_b;
    const double cov = filtered[4][i] - mu_a * mu_b;
    total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
             ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(filtered[0].size());
}

inline QualityScore ssim(const Image& reference, const Image& distorted) {
  const auto a = luminance(reference);
  const auto b = luminance(distorted);
  QualityScore s;
  s.raw = ssim_plane(a, b, kImageSize, kImageSize);
  s.transformed = transform_score(s.raw);
  return s;
}

}  // namespace iqals

#endif  // IQALS_IQA_HPP
