#ifndef IQALS_JPEG_HPP
#define IQALS_JPEG_HPP

// Baseline sequential JPEG (ITU T.81) encoder and decoder.
//
// The encoder always emits YCbCr with 4:2:0 chroma subsampling, 8-bit
// quantization tables derived from the Annex K tables with the IJG quality
// scaling (forced into the baseline range [1, 255]), and the Annex K Huffman
// tables. The decoder accepts any baseline, Huffman-coded, 8-bit stream with
// one or three components and integer sampling factors up to 4; chroma is
// upsampled by replication.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "iqals/error.hpp"
#include "iqals/image.hpp"

namespace iqals::jpeg {

// Interleaved RGB raster of arbitrary size.
struct RgbRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, RGB triplets

  std::uint8_t& at(int row, int col, int channel) {
    return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
  }
  std::uint8_t at(int row, int col, int channel) const {
    return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
  }
};

inline RgbRaster to_raster(const Image& img) {
  RgbRaster r{kImageSize, kImageSize, std::vector<std::uint8_t>(kImageBytes)};
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x)
      for (int c = 0; c < 3; ++c) r.at(y, x, c) = img.at(c, y, x);
  return r;
}

inline Image to_image(const RgbRaster& r) {
  if (r.width != kImageSize || r.height != kImageSize) {
    throw ParameterError("jpeg: raster is not 32x32");
  }
  Image img;
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = r.at(y, x, c);
  return img;
}

namespace detail {

// natural-order index of the k-th coefficient in zigzag order
inline constexpr std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

inline constexpr std::array<int, 64> kLumaQuant = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

inline constexpr std::array<int, 64> kChromaQuant = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

struct HuffmanSpec {
  std::array<std::uint8_t, 16> counts;
  std::vector<std::uint8_t> symbols;
};

inline const HuffmanSpec& dc_luma_spec() {
  static const HuffmanSpec spec{{0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0},
                                {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
  return spec;
}

inline const HuffmanSpec& dc_chroma_spec() {
  static const HuffmanSpec spec{{0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0},
                                {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
  return spec;
}

inline const HuffmanSpec& ac_luma_spec() {
  static const HuffmanSpec spec{
      {0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d},
      {0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61,
       0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52,
       0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25,
       0x26, 0x27, 0x28, 0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45,
       0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64,
       0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83,
       0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99,
       0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6,
       0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3,
       0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8,
       0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};
  return spec;
}

inline const HuffmanSpec& ac_chroma_spec() {
  static const HuffmanSpec spec{
      {0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77},
      {0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61,
       0x71, 0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33,
       0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18,
       0x19, 0x1a, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44,
       0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63,
       0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a,
       0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97,
       0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4,
       0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca,
       0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7,
       0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};
  return spec;
}

// cos((2x+1) u pi / 16) * C(u) / 2, indexed [u][x]
inline const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::numbers::sqrt2 / 2.0 : 1.0;
      for (int x = 0; x < 8; ++x) {
        b[u][x] = 0.5 * cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
    return b;
  }();
  return basis;
}

// Separable orthonormal 8x8 DCT-II, row-major in and out.
inline std::array<double, 64> forward_dct(const std::array<double, 64>& block) {
  const auto& b = dct_basis();
  std::array<double, 64> tmp{};
  std::array<double, 64> out{};
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += b[u][x] * block[y * 8 + x];
      tmp[y * 8 + u] = s;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += b[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = s;
    }
  return out;
}

inline std::array<double, 64> inverse_dct(const std::array<double, 64>& coef) {
  const auto& b = dct_basis();
  std::array<double, 64> tmp{};
  std::array<double, 64> out{};
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += b[u][x] * coef[v * 8 + u];
      tmp[v * 8 + x] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += b[v][y] * tmp[v * 8 + x];
      out[y * 8 + x] = s;
    }
  return out;
}

struct HuffmanCode {
  std::uint16_t code = 0;
  std::uint8_t length = 0;
};

inline std::array<HuffmanCode, 256> build_encoder_table(const HuffmanSpec& spec) {
  std::array<HuffmanCode, 256> table{};
  std::uint16_t code = 0;
  std::size_t k = 0;
  for (int len = 1; len <= 16; ++len) {
    for (int i = 0; i < spec.counts[static_cast<std::size_t>(len - 1)]; ++i) {
      table[spec.symbols[k++]] = {code, static_cast<std::uint8_t>(len)};
      ++code;
    }
    code = static_cast<std::uint16_t>(code << 1);
  }
  return table;
}

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put(std::uint32_t bits, int count) {
    for (int i = count - 1; i >= 0; --i) {
      acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((bits >> i) & 1u));
      if (++filled_ == 8) emit();
    }
  }

  // pad the last byte with 1-bits
  void flush() {
    while (filled_ != 0) put(1, 1);
  }

 private:
  void emit() {
    out_.push_back(acc_);
    if (acc_ == 0xFF) out_.push_back(0x00);
    acc_ = 0;
    filled_ = 0;
  }

  std::vector<std::uint8_t>& out_;
  std::uint8_t acc_ = 0;
  int filled_ = 0;
};

inline int magnitude_category(int v) {
  int a = std::abs(v);
  int n = 0;
  while (a) {
    ++n;
    a >>= 1;
  }
  return n;
}

inline std::uint32_t magnitude_bits(int v, int category) {
  return static_cast<std::uint32_t>(v >= 0 ? v : v + (1 << category) - 1);
}

inline void put_u16(std::vector<std::uint8_t>& out, int v) {
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline void put_marker(std::vector<std::uint8_t>& out, std::uint8_t marker) {
  out.push_back(0xFF);
  out.push_back(marker);
}

}  // namespace detail

// IJG quality scaling of a base table, clamped to the baseline range.
inline std::array<int, 64> scaled_quant_table(const std::array<int, 64>& base, int quality) {
  if (quality < 1 || quality > 100) throw ParameterError("jpeg: quality must be in [1,100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> out{};
  for (int i = 0; i < 64; ++i) {
    out[static_cast<std::size_t>(i)] =
        std::clamp((base[static_cast<std::size_t>(i)] * scale + 50) / 100, 1, 255);
  }
  return out;
}

inline std::array<int, 64> luma_quant_table(int quality) {
  return scaled_quant_table(detail::kLumaQuant, quality);
}
inline std::array<int, 64> chroma_quant_table(int quality) {
  return scaled_quant_table(detail::kChromaQuant, quality);
}

inline std::vector<std::uint8_t> encode(const RgbRaster& raster, int quality) {
  using namespace detail;
  if (quality < 1 || quality > 100) throw ParameterError("jpeg: quality must be in [1,100]");
  if (raster.width <= 0 || raster.height <= 0 || raster.width > 65535 || raster.height > 65535 ||
      raster.pixels.size() != static_cast<std::size_t>(raster.width) * raster.height * 3) {
    throw ParameterError("jpeg: invalid raster dimensions");
  }
  const auto qy = luma_quant_table(quality);
  const auto qc = chroma_quant_table(quality);

  std::vector<std::uint8_t> out;
  put_marker(out, 0xD8);

  // APP0 / JFIF 1.01, no thumbnail
  put_marker(out, 0xE0);
  put_u16(out, 16);
  for (char c : std::string("JFIF")) out.push_back(static_cast<std::uint8_t>(c));
  out.insert(out.end(), {0, 1, 1, 0, 0, 1, 0, 1, 0, 0});

  put_marker(out, 0xDB);
  put_u16(out, 2 + 2 * 65);
  for (int t = 0; t < 2; ++t) {
    out.push_back(static_cast<std::uint8_t>(t));
    const auto& q = t == 0 ? qy : qc;
    for (int k = 0; k < 64; ++k) out.push_back(static_cast<std::uint8_t>(q[kZigzag[k]]));
  }

  put_marker(out, 0xC0);
  put_u16(out, 8 + 3 * 3);
  out.push_back(8);
  put_u16(out, raster.height);
  put_u16(out, raster.width);
  out.push_back(3);
  out.insert(out.end(), {1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1});

  const HuffmanSpec* specs[4] = {&dc_luma_spec(), &ac_luma_spec(), &dc_chroma_spec(),
                                 &ac_chroma_spec()};
  const std::uint8_t classes[4] = {0x00, 0x10, 0x01, 0x11};
  put_marker(out, 0xC4);
  int dht_len = 2;
  for (const auto* s : specs) dht_len += 17 + static_cast<int>(s->symbols.size());
  put_u16(out, dht_len);
  for (int i = 0; i < 4; ++i) {
    out.push_back(classes[i]);
    out.insert(out.end(), specs[i]->counts.begin(), specs[i]->counts.end());
    out.insert(out.end(), specs[i]->symbols.begin(), specs[i]->symbols.end());
  }

  put_marker(out, 0xDA);
  put_u16(out, 6 + 2 * 3);
  out.push_back(3);
  out.insert(out.end(), {1, 0x00, 2, 0x11, 3, 0x11});
  out.insert(out.end(), {0, 63, 0});

  const auto dc_y = build_encoder_table(dc_luma_spec());
  const auto ac_y = build_encoder_table(ac_luma_spec());
  const auto dc_c = build_encoder_table(dc_chroma_spec());
  const auto ac_c = build_encoder_table(ac_chroma_spec());

  // Full-resolution YCbCr planes, edge-replicated up to whole MCUs.
  const int mcus_x = (raster.width + 15) / 16;
  const int mcus_y = (raster.height + 15) / 16;
  const int pw = mcus_x * 16;
  const int ph = mcus_y * 16;
  std::vector<double> ys(static_cast<std::size_t>(pw * ph));
  std::vector<double> cbs(ys.size());
  std::vector<double> crs(ys.size());
  for (int y = 0; y < ph; ++y) {
    const int sy = std::min(y, raster.height - 1);
    for (int x = 0; x < pw; ++x) {
      const int sx = std::min(x, raster.width - 1);
      const double r = raster.at(sy, sx, 0);
      const double g = raster.at(sy, sx, 1);
      const double b = raster.at(sy, sx, 2);
      const auto i = static_cast<std::size_t>(y * pw + x);
      ys[i] = 0.299 * r + 0.587 * g + 0.114 * b;
      cbs[i] = -0.168735892 * r - 0.331264108 * g + 0.5 * b + 128.0;
      crs[i] = 0.5 * r - 0.418687589 * g - 0.081312411 * b + 128.0;
    }
  }

  BitWriter bits(out);
  int prev_dc[3] = {0, 0, 0};
  auto encode_block = [&](const std::array<double, 64>& samples, const std::array<int, 64>& q,
                          const std::array<HuffmanCode, 256>& dc_table,
                          const std::array<HuffmanCode, 256>& ac_table, int& prev) {
    std::array<double, 64> shifted{};
    for (int i = 0; i < 64; ++i) shifted[i] = samples[i] - 128.0;
    const auto coef = forward_dct(shifted);
    std::array<int, 64> zz{};
    for (int k = 0; k < 64; ++k) {
      const int n = kZigzag[k];
      zz[k] = static_cast<int>(std::lround(coef[n] / q[n]));
    }
    const int diff = zz[0] - prev;
    prev = zz[0];
    const int dc_cat = magnitude_category(diff);
    bits.put(dc_table[dc_cat].code, dc_table[dc_cat].length);
    if (dc_cat) bits.put(magnitude_bits(diff, dc_cat), dc_cat);

    int run = 0;
    for (int k = 1; k < 64; ++k) {
      if (zz[k] == 0) {
        ++run;
        continue;
      }
      while (run > 15) {
        bits.put(ac_table[0xF0].code, ac_table[0xF0].length);
        run -= 16;
      }
      const int cat = magnitude_category(zz[k]);
      const int symbol = (run << 4) | cat;
      bits.put(ac_table[symbol].code, ac_table[symbol].length);
      bits.put(magnitude_bits(zz[k], cat), cat);
      run = 0;
    }
    if (run > 0) bits.put(ac_table[0x00].code, ac_table[0x00].length);
  };

  for (int my = 0; my < mcus_y; ++my) {
    for (int mx = 0; mx < mcus_x; ++mx) {
      std::array<double, 64> block{};
      for (int by = 0; by < 2; ++by)
        for (int bx = 0; bx < 2; ++bx) {
          for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
              const int py = my * 16 + by * 8 + y;
              const int px = mx * 16 + bx * 8 + x;
              block[y * 8 + x] = ys[static_cast<std::size_t>(py * pw + px)];
            }
          encode_block(block, qy, dc_y, ac_y, prev_dc[0]);
        }
      for (int c = 0; c < 2; ++c) {
        const auto& plane = c == 0 ? cbs : crs;
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            const int py = my * 16 + 2 * y;
            const int px = mx * 16 + 2 * x;
            const auto i = static_cast<std::size_t>(py * pw + px);
            block[y * 8 + x] = 0.25 * (plane[i] + plane[i + 1] + plane[i + pw] + plane[i + pw + 1]);
          }
        encode_block(block, qc, dc_c, ac_c, prev_dc[1 + c]);
      }
    }
  }
  bits.flush();
  put_marker(out, 0xD9);
  return out;
}

namespace detail {

struct HuffmanDecoder {
  std::array<int, 18> maxcode{};
  std::array<int, 17> valptr{};
  std::array<int, 17> mincode{};
  std::vector<std::uint8_t> symbols;
  bool defined = false;

  void build(const std::array<std::uint8_t, 16>& counts, std::vector<std::uint8_t> syms) {
    symbols = std::move(syms);
    int code = 0;
    int k = 0;
    for (int len = 1; len <= 16; ++len) {
      const int n = counts[static_cast<std::size_t>(len - 1)];
      if (n == 0) {
        maxcode[len] = -1;
      } else {
        valptr[len] = k;
        mincode[len] = code;
        code += n;
        k += n;
        maxcode[len] = code - 1;
      }
      code <<= 1;
    }
    maxcode[17] = 0x7FFFFFFF;
    defined = true;
  }
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> data, std::size_t pos) : data_(data), pos_(pos) {}

  int bit() {
    if (filled_ == 0) fill();
    --filled_;
    return (acc_ >> filled_) & 1;
  }

  int bits(int n) {
    int v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | bit();
    return v;
  }

  int decode(const HuffmanDecoder& h) {
    if (!h.defined) throw DataError("jpeg: undefined Huffman table");
    int code = bit();
    int len = 1;
    while (len <= 16 && code > h.maxcode[len]) {
      code = (code << 1) | bit();
      ++len;
    }
    if (len > 16) throw DataError("jpeg: bad Huffman code");
    return h.symbols.at(static_cast<std::size_t>(h.valptr[len] + code - h.mincode[len]));
  }

  // Discard buffered bits and consume an RSTn marker.
  void restart() {
    filled_ = 0;
    at_marker_ = false;
    while (pos_ + 1 < data_.size() && !(data_[pos_] == 0xFF && data_[pos_ + 1] >= 0xD0 &&
                                        data_[pos_ + 1] <= 0xD7)) {
      ++pos_;
    }
    if (pos_ + 1 >= data_.size()) throw DataError("jpeg: missing restart marker");
    pos_ += 2;
  }

  std::size_t position() const { return pos_; }

 private:
  void fill() {
    filled_ = 8;
    if (at_marker_ || pos_ >= data_.size()) {
      acc_ = 0;
      return;
    }
    std::uint8_t b = data_[pos_];
    if (b == 0xFF) {
      const std::uint8_t next = pos_ + 1 < data_.size() ? data_[pos_ + 1] : 0xD9;
      if (next == 0x00) {
        pos_ += 2;
      } else {
        at_marker_ = true;
        acc_ = 0;
        return;
      }
    } else {
      ++pos_;
    }
    acc_ = b;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_;
  int acc_ = 0;
  int filled_ = 0;
  bool at_marker_ = false;
};

inline int extend(int v, int category) {
  return v < (1 << (category - 1)) ? v - (1 << category) + 1 : v;
}

}  // namespace detail

inline RgbRaster decode(std::span<const std::uint8_t> data) {
  using namespace detail;
  struct Component {
    int id = 0, h = 1, v = 1, tq = 0, td = 0, ta = 0;
    int pred = 0;
    int plane_w = 0, plane_h = 0;
    std::vector<std::uint8_t> plane;
  };
  std::array<std::array<int, 64>, 4> qt{};
  std::array<HuffmanDecoder, 4> dc_tables{};
  std::array<HuffmanDecoder, 4> ac_tables{};
  std::vector<Component> comps;
  int width = 0, height = 0, restart_interval = 0;
  bool frame_seen = false, scan_done = false;

  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > data.size()) throw DataError("jpeg: truncated stream");
  };
  auto u16 = [&] {
    need(2);
    const int v = (data[pos] << 8) | data[pos + 1];
    pos += 2;
    return v;
  };

  need(2);
  if (data[0] != 0xFF || data[1] != 0xD8) throw DataError("jpeg: missing SOI marker");
  pos = 2;

  while (!scan_done) {
    need(2);
    if (data[pos] != 0xFF) throw DataError("jpeg: expected marker");
    while (pos < data.size() && data[pos] == 0xFF) ++pos;
    need(1);
    const std::uint8_t marker = data[pos++];
    if (marker == 0xD9) break;
    const int len = u16();
    if (len < 2) throw DataError("jpeg: bad segment length");
    need(static_cast<std::size_t>(len - 2));
    const std::size_t seg_end = pos + static_cast<std::size_t>(len - 2);

    switch (marker) {
      case 0xDB: {
        while (pos < seg_end) {
          const int pq = data[pos] >> 4;
          const int tq = data[pos] & 0xF;
          ++pos;
          if (tq > 3) throw DataError("jpeg: bad quantization table id");
          for (int k = 0; k < 64; ++k) {
            int v = data[pos++];
            if (pq) v = (v << 8) | data[pos++];
            qt[static_cast<std::size_t>(tq)][static_cast<std::size_t>(kZigzag[k])] = v;
          }
        }
        break;
      }
      case 0xC4: {
        while (pos < seg_end) {
          const int tc = data[pos] >> 4;
          const int th = data[pos] & 0xF;
          ++pos;
          if (tc > 1 || th > 3) throw DataError("jpeg: bad Huffman table id");
          std::array<std::uint8_t, 16> counts{};
          int total = 0;
          for (int i = 0; i < 16; ++i) {
            counts[static_cast<std::size_t>(i)] = data[pos++];
            total += counts[static_cast<std::size_t>(i)];
          }
          if (pos + static_cast<std::size_t>(total) > seg_end) throw DataError("jpeg: bad DHT");
          std::vector<std::uint8_t> syms(data.begin() + static_cast<std::ptrdiff_t>(pos),
                                         data.begin() + static_cast<std::ptrdiff_t>(pos) + total);
          pos += static_cast<std::size_t>(total);
          (tc == 0 ? dc_tables : ac_tables)[static_cast<std::size_t>(th)].build(counts,
                                                                                std::move(syms));
        }
        break;
      }
      case 0xC0:
      case 0xC1: {
        if (data[pos] != 8) throw DataError("jpeg: only 8-bit precision is supported");
        height = (data[pos + 1] << 8) | data[pos + 2];
        width = (data[pos + 3] << 8) | data[pos + 4];
        const int n = data[pos + 5];
        if (width == 0 || height == 0) throw DataError("jpeg: zero-sized frame");
        if (n != 1 && n != 3) throw DataError("jpeg: only 1 or 3 components are supported");
        pos += 6;
        for (int i = 0; i < n; ++i) {
          Component c;
          c.id = data[pos];
          c.h = data[pos + 1] >> 4;
          c.v = data[pos + 1] & 0xF;
          c.tq = data[pos + 2] & 0x3;
          if (c.h < 1 || c.h > 4 || c.v < 1 || c.v > 4) throw DataError("jpeg: bad sampling");
          pos += 3;
          comps.push_back(std::move(c));
        }
        frame_seen = true;
        break;
      }
      case 0xC2:
      case 0xC3:
      case 0xC5:
      case 0xC6:
      case 0xC7:
      case 0xC9:
      case 0xCA:
      case 0xCB:
      case 0xCD:
      case 0xCE:
      case 0xCF:
        throw DataError("jpeg: only baseline Huffman coding is supported");
      case 0xDD:
        restart_interval = u16();
        break;
      case 0xDA: {
        if (!frame_seen) throw DataError("jpeg: scan before frame header");
        const int ns = data[pos++];
        if (ns != static_cast<int>(comps.size())) {
          throw DataError("jpeg: non-interleaved scans are not supported");
        }
        for (int i = 0; i < ns; ++i) {
          const int id = data[pos];
          const auto it = std::find_if(comps.begin(), comps.end(),
                                       [&](const Component& c) { return c.id == id; });
          if (it == comps.end()) throw DataError("jpeg: scan references unknown component");
          it->td = data[pos + 1] >> 4;
          it->ta = data[pos + 1] & 0xF;
          if (it->td > 3 || it->ta > 3) throw DataError("jpeg: bad table selector");
          pos += 2;
        }
        pos = seg_end;

        int hmax = 1, vmax = 1;
        for (const auto& c : comps) {
          hmax = std::max(hmax, c.h);
          vmax = std::max(vmax, c.v);
        }
        if (comps.size() == 1) {
          // single-component scans are non-interleaved: one block per MCU
          comps[0].h = comps[0].v = 1;
          hmax = vmax = 1;
        }
        const int mcu_w = 8 * hmax;
        const int mcu_h = 8 * vmax;
        const int mcus_x = (width + mcu_w - 1) / mcu_w;
        const int mcus_y = (height + mcu_h - 1) / mcu_h;
        for (auto& c : comps) {
          c.plane_w = mcus_x * c.h * 8;
          c.plane_h = mcus_y * c.v * 8;
          c.plane.assign(static_cast<std::size_t>(c.plane_w * c.plane_h), 0);
          c.pred = 0;
        }

        BitReader reader(data, pos);
        int mcus_left = restart_interval;
        for (int my = 0; my < mcus_y; ++my) {
          for (int mx = 0; mx < mcus_x; ++mx) {
            if (restart_interval) {
              if (mcus_left == 0) {
                reader.restart();
                for (auto& c : comps) c.pred = 0;
                mcus_left = restart_interval;
              }
              --mcus_left;
            }
            for (auto& c : comps) {
              const auto& q = qt[static_cast<std::size_t>(c.tq)];
              for (int by = 0; by < c.v; ++by)
                for (int bx = 0; bx < c.h; ++bx) {
                  std::array<double, 64> coef{};
                  const int t = reader.decode(dc_tables[static_cast<std::size_t>(c.td)]);
                  if (t > 11) throw DataError("jpeg: bad DC category");
                  c.pred += t ? extend(reader.bits(t), t) : 0;
                  coef[0] = static_cast<double>(c.pred) * q[0];
                  for (int k = 1; k < 64;) {
                    const int rs = reader.decode(ac_tables[static_cast<std::size_t>(c.ta)]);
                    const int r = rs >> 4;
                    const int s = rs & 0xF;
                    if (s == 0) {
                      if (r != 15) break;
                      k += 16;
                      continue;
                    }
                    k += r;
                    if (k > 63) throw DataError("jpeg: coefficient index out of range");
                    const int n = kZigzag[static_cast<std::size_t>(k)];
                    coef[static_cast<std::size_t>(n)] =
                        static_cast<double>(extend(reader.bits(s), s)) * q[static_cast<std::size_t>(n)];
                    ++k;
                  }
                  const auto samples = inverse_dct(coef);
                  for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) {
                      const int py = (my * c.v + by) * 8 + y;
                      const int px = (mx * c.h + bx) * 8 + x;
                      c.plane[static_cast<std::size_t>(py * c.plane_w + px)] =
                          clamp_to_byte(samples[static_cast<std::size_t>(y * 8 + x)] + 128.0);
                    }
                }
            }
          }
        }
        scan_done = true;

        RgbRaster out{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
        auto sample = [&](const Component& c, int y, int x) {
          const int sy = y * c.v / vmax;
          const int sx = x * c.h / hmax;
          return static_cast<double>(c.plane[static_cast<std::size_t>(sy * c.plane_w + sx)]);
        };
        for (int y = 0; y < height; ++y)
          for (int x = 0; x < width; ++x) {
            if (comps.size() == 1) {
              const auto g = static_cast<std::uint8_t>(sample(comps[0], y, x));
              out.at(y, x, 0) = out.at(y, x, 1) = out.at(y, x, 2) = g;
              continue;
            }
            const double yy = sample(comps[0], y, x);
            const double cb = sample(comps[1], y, x) - 128.0;
            const double cr = sample(comps[2], y, x) - 128.0;
            out.at(y, x, 0) = clamp_to_byte(yy + 1.402 * cr);
            out.at(y, x, 1) = clamp_to_byte(yy - 0.344136286 * cb - 0.714136286 * cr);
            out.at(y, x, 2) = clamp_to_byte(yy + 1.772 * cb);
          }
        return out;
      }
      default:
        break;  // APPn, COM and other informational segments
    }
    pos = seg_end;
  }
  throw DataError("jpeg: stream ended before a scan was decoded");
}

}  // namespace iqals::jpeg

#endif  // IQALS_JPEG_HPP
