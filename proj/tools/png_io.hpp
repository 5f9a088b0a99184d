#ifndef IQALS_TOOLS_PNG_IO_HPP
#define IQALS_TOOLS_PNG_IO_HPP

// 32x32 RGB PNG files through libpng's simplified API. Used only for the
// inspection commands; the pipeline itself never touches PNG.

#include <png.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "iqals/error.hpp"
#include "iqals/image.hpp"

namespace iqals::tools {

inline Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  if (png.width != kImageSize || png.height != kImageSize) {
    png_image_free(&png);
    throw DataError(path.string() + " is " + std::to_string(png.width) + "x" +
                    std::to_string(png.height) + ", expected 32x32");
  }
  std::vector<png_byte> rgb(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, rgb.data(), 0, nullptr)) {
    throw DataError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  Image img;
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x)
      for (int c = 0; c < kImageChannels; ++c)
        img.at(c, y, x) = rgb[static_cast<std::size_t>((y * kImageSize + x) * 3 + c)];
  return img;
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
  std::vector<png_byte> rgb(kImageBytes);
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x)
      for (int c = 0; c < kImageChannels; ++c)
        rgb[static_cast<std::size_t>((y * kImageSize + x) * 3 + c)] = img.at(c, y, x);
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = kImageSize;
  png.height = kImageSize;
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    throw Error("cannot write PNG " + path.string() + ": " + png.message);
  }
}

}  // namespace iqals::tools

#endif  // IQALS_TOOLS_PNG_IO_HPP
