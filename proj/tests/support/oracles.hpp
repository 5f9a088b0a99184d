#ifndef IQALS_TESTS_ORACLES_HPP
#define IQALS_TESTS_ORACLES_HPP

// Brute-force reference computations. These follow the textbook definitions
// directly (dense loops, no separability, no shared helpers with the library)
// and exist only to check the optimized code paths.

#include <cmath>
#include <cstdint>
#include <vector>

#include "iqals/image.hpp"

namespace iqals::oracle {

// Direct 2-D convolution with a dense sigma Gaussian (radius ceil(3 sigma),
// renormalized) and mirror borders without edge repetition.
inline std::vector<double> dense_blur(const std::vector<double>& plane, int w, int h, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel;
  double sum = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      kernel.push_back(v);
      sum += v;
    }
  for (double& v : kernel) v /= sum;
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  std::vector<double> out(plane.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      std::size_t k = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx, ++k)
          acc += kernel[k] * plane[static_cast<std::size_t>(mirror(y + dy, h) * w + mirror(x + dx, w))];
      out[static_cast<std::size_t>(y * w + x)] = acc;
    }
  return out;
}

// Mean SSIM by explicit per-window weighted statistics (11x11, sigma 1.5,
// valid windows, L = 255) on Rec. 601 luma.
inline double brute_force_ssim(const Image& a, const Image& b) {
  auto luma = [](const Image& img, int y, int x) {
    return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
  };
  double weights[11][11];
  double wsum = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      weights[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      wsum += weights[i][j];
    }
  const double c1 = std::pow(0.01 * 255.0, 2);
  const double c2 = std::pow(0.03 * 255.0, 2);
  double total = 0.0;
  int windows = 0;
  for (int y0 = 0; y0 + 11 <= kImageSize; ++y0)
    for (int x0 = 0; x0 + 11 <= kImageSize; ++x0) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = weights[i][j] / wsum;
          mx += w * luma(a, y0 + i, x0 + j);
          my += w * luma(b, y0 + i, x0 + j);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = weights[i][j] / wsum;
          const double dx = luma(a, y0 + i, x0 + j) - mx;
          const double dy = luma(b, y0 + i, x0 + j) - my;
          vx += w * dx * dx;
          vy += w * dy * dy;
          cxy += w * dx * dy;
        }
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  return total / windows;
}

// Per-element LRN from its definition; channel-last data, `channels` fastest.
inline std::vector<double> brute_force_lrn(const std::vector<double>& x, int channels, int radius,
                                           double bias, double alpha, double beta) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int c = static_cast<int>(i % channels);
    const std::size_t base = i - c;
    double s = 0.0;
    for (int j = c - radius; j <= c + radius; ++j)
      if (j >= 0 && j < channels) s += x[base + j] * x[base + j];
    out[i] = x[i] / std::pow(bias + alpha * s, beta);
  }
  return out;
}

inline double psnr(const Image& a, const Image& b) {
  double mse = 0.0;
  for (std::size_t i = 0; i < a.bytes().size(); ++i) {
    const double d = static_cast<double>(a.bytes()[i]) - b.bytes()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.bytes().size());
  return mse == 0.0 ? 99.0 : 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace iqals::oracle

#endif  // IQALS_TESTS_ORACLES_HPP
