#ifndef IQALS_DISTORT_HPP
#define IQALS_DISTORT_HPP

// Seeded, deterministic distortion generators: Gaussian blur, additive white
// Gaussian noise and JPEG compression, each at three fixed levels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iqals/error.hpp"
#include "iqals/image.hpp"
#include "iqals/jpeg.hpp"
#include "iqals/rng.hpp"

namespace iqals {

enum class DistortionKind { kBlur, kNoise, kJpeg };

inline constexpr DistortionKind kAllDistortionKinds[] = {DistortionKind::kBlur,
                                                          DistortionKind::kNoise,
                                                          DistortionKind::kJpeg};

inline std::string_view to_string(DistortionKind kind) {
  switch (kind) {
    case DistortionKind::kBlur:
      return "blur";
    case DistortionKind::kNoise:
      return "noise";
    case DistortionKind::kJpeg:
      return "jpeg";
  }
  return "?";
}

inline DistortionKind parse_distortion_kind(std::string_view name) {
  if (name == "blur") return DistortionKind::kBlur;
  if (name == "noise") return DistortionKind::kNoise;
  if (name == "jpeg" || name == "JPEG") return DistortionKind::kJpeg;
  throw ConfigError("unknown distortion kind '" + std::string(name) + "' (blur|noise|jpeg)");
}

inline constexpr double kBlurSigmas[3] = {0.7, 1.0, 1.2};
inline constexpr double kNoiseVariances[3] = {0.005, 0.01, 0.02};
inline constexpr int kJpegQualities[3] = {12, 8, 4};

struct DistortionSpec {
  DistortionKind kind = DistortionKind::kBlur;
  int level = 1;
  std::optional<double> sigma;
  std::optional<double> variance;
  std::optional<int> quality;

  // The canonical parameters for (kind, level), level in {1,2,3}.
  static DistortionSpec at_level(DistortionKind kind, int level) {
    if (level < 1 || level > 3) throw ParameterError("distortion level must be 1, 2 or 3");
    DistortionSpec s;
    s.kind = kind;
    s.level = level;
    const auto i = static_cast<std::size_t>(level - 1);
    switch (kind) {
      case DistortionKind::kBlur:
        s.sigma = kBlurSigmas[i];
        break;
      case DistortionKind::kNoise:
        s.variance = kNoiseVariances[i];
        break;
      case DistortionKind::kJpeg:
        s.quality = kJpegQualities[i];
        break;
    }
    return s;
  }

  void validate() const {
    const int set = sigma.has_value() + variance.has_value() + quality.has_value();
    const bool matches = (kind == DistortionKind::kBlur && sigma) ||
                         (kind == DistortionKind::kNoise && variance) ||
                         (kind == DistortionKind::kJpeg && quality);
    if (set != 1 || !matches) {
      throw ParameterError("distortion spec must set exactly the parameter of its kind");
    }
  }

  std::string name() const { return std::string(to_string(kind)) + "-" + std::to_string(level); }
};

// Normalized 1-D Gaussian taps, radius ceil(3 sigma), renormalized after
// truncation. sigma == 0 yields the identity kernel {1}.
inline std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("blur sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// Reflect-101 border indexing (dcb|abcd|cba), valid for any offset.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Separable Gaussian blur of one row-major plane; values are not clamped.
inline std::vector<double> blur_plane(std::span<const double> plane, int width, int height,
                                      double sigma) {
  const auto k = gaussian_kernel_1d(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(plane.size());
  std::vector<double> out(plane.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        s += k[static_cast<std::size_t>(d + radius)] *
             plane[static_cast<std::size_t>(y * width + reflect_index(x + d, width))];
      }
      tmp[static_cast<std::size_t>(y * width + x)] = s;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        s += k[static_cast<std::size_t>(d + radius)] *
             tmp[static_cast<std::size_t>(reflect_index(y + d, height) * width + x)];
      }
      out[static_cast<std::size_t>(y * width + x)] = s;
    }
  return out;
}

inline Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("blur sigma must be >= 0");
  Image out;
  for (int c = 0; c < kImageChannels; ++c) {
    const auto src = img.plane(c);
    std::vector<double> plane(src.begin(), src.end());
    const auto blurred = blur_plane(plane, kImageSize, kImageSize, sigma);
    auto dst = out.bytes().subspan(static_cast<std::size_t>(c * kPlaneSize), kPlaneSize);
    for (std::size_t i = 0; i < blurred.size(); ++i) dst[i] = clamp_to_byte(blurred[i]);
  }
  return out;
}

// Adds N(0, variance) per pixel and channel in the [0,1] domain, clamps and
// requantizes. Variates are drawn in plane-major order from Rng(seed).
inline Image add_gaussian_noise(const Image& img, double variance, std::uint64_t seed) {
  if (!(variance >= 0.0)) throw ParameterError("noise variance must be >= 0");
  if (variance == 0.0) return img;
  const double stddev = std::sqrt(variance);
  Rng rng(seed);
  Image out;
  const auto src = img.bytes();
  auto dst = out.bytes();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = byte_to_real(src[i]) + stddev * rng.normal();
    dst[i] = real_to_byte(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

inline std::vector<std::uint8_t> jpeg_encode(const Image& img, int quality) {
  return jpeg::encode(jpeg::to_raster(img), quality);
}

inline Image jpeg_roundtrip(const Image& img, int quality) {
  if (quality < 1 || quality > 100) throw ParameterError("jpeg quality must be in [1,100]");
  return jpeg::to_image(jpeg::decode(jpeg_encode(img, quality)));
}

// Dispatches to the generator of spec.kind; only noise consumes the seed.
inline Image apply(const DistortionSpec& spec, const Image& img, std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case DistortionKind::kBlur:
      return gaussian_blur(img, *spec.sigma);
    case DistortionKind::kNoise:
      return add_gaussian_noise(img, *spec.variance, seed);
    case DistortionKind::kJpeg:
      return jpeg_roundtrip(img, *spec.quality);
  }
  throw ParameterError("unknown distortion kind");
}

}  // namespace iqals

#endif  // IQALS_DISTORT_HPP
