#ifndef IQALS_IMAGE_HPP
#define IQALS_IMAGE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "iqals/error.hpp"

namespace iqals {

inline constexpr int kImageSize = 32;
inline constexpr int kImageChannels = 3;
inline constexpr int kPlaneSize = kImageSize * kImageSize;
inline constexpr int kImageBytes = kPlaneSize * kImageChannels;

inline double byte_to_real(std::uint8_t b) { return b / 255.0; }

// Rounds half away from zero and clamps into [0, 255].
inline std::uint8_t real_to_byte(double v) {
  const long r = std::lround(v * 255.0);
  return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

inline std::uint8_t clamp_to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// A 32x32 RGB raster stored plane-major (R plane, G plane, B plane, each
// row-major), which is exactly the CIFAR-10 record layout.
class Image {
 public:
  Image() { bytes_.fill(0); }
  explicit Image(std::span<const std::uint8_t> plane_major) {
    if (plane_major.size() != bytes_.size()) {
      throw ParameterError("image: expected 3072 plane-major bytes");
    }
    std::copy(plane_major.begin(), plane_major.end(), bytes_.begin());
  }

  static Image filled(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Image img;
    std::fill_n(img.bytes_.begin(), kPlaneSize, r);
    std::fill_n(img.bytes_.begin() + kPlaneSize, kPlaneSize, g);
    std::fill_n(img.bytes_.begin() + 2 * kPlaneSize, kPlaneSize, b);
    return img;
  }

  std::uint8_t& at(int channel, int row, int col) {
    return bytes_[static_cast<std::size_t>(channel * kPlaneSize + row * kImageSize + col)];
  }
  std::uint8_t at(int channel, int row, int col) const {
    return bytes_[static_cast<std::size_t>(channel * kPlaneSize + row * kImageSize + col)];
  }

  std::span<std::uint8_t> bytes() { return bytes_; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

  std::span<const std::uint8_t> plane(int channel) const {
    return std::span(bytes_).subspan(static_cast<std::size_t>(channel * kPlaneSize), kPlaneSize);
  }

  // Normalized [0,1] values in the same plane-major order.
  std::vector<double> normalized() const {
    std::vector<double> out(bytes_.size());
    std::transform(bytes_.begin(), bytes_.end(), out.begin(), byte_to_real);
    return out;
  }

  static Image from_normalized(std::span<const double> values) {
    if (values.size() != static_cast<std::size_t>(kImageBytes)) {
      throw ParameterError("image: expected 3072 normalized values");
    }
    Image img;
    std::transform(values.begin(), values.end(), img.bytes_.begin(), real_to_byte);
    return img;
  }

  // Writes the image as channel-last (row, col, channel) normalized values.
  template <typename T>
  void write_channel_last(std::span<T> out) const {
    for (int y = 0; y < kImageSize; ++y) {
      for (int x = 0; x < kImageSize; ++x) {
        for (int c = 0; c < kImageChannels; ++c) {
          out[static_cast<std::size_t>((y * kImageSize + x) * kImageChannels + c)] =
              static_cast<T>(byte_to_real(at(c, y, x)));
        }
      }
    }
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::array<std::uint8_t, kImageBytes> bytes_;
};

// Rec. 601 luma in byte scale, row-major.
inline std::vector<double> luminance(const Image& img) {
  std::vector<double> y(kPlaneSize);
  const auto r = img.plane(0);
  const auto g = img.plane(1);
  const auto b = img.plane(2);
  for (int i = 0; i < kPlaneSize; ++i) {
    y[static_cast<std::size_t>(i)] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  }
  return y;
}

}  // namespace iqals

#endif  // IQALS_IMAGE_HPP
