#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "iqals/digest.hpp"
#include "iqals/image.hpp"
#include "iqals/parallel.hpp"
#include "iqals/rng.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace iqals;

TEST(Image, ByteRealByteRoundTripIsIdentity) {
  for (int b = 0; b <= 255; ++b) {
    const auto v = static_cast<std::uint8_t>(b);
    EXPECT_EQ(real_to_byte(byte_to_real(v)), v);
  }
}

TEST(Image, RealToByteRoundsHalfAwayFromZeroAndClamps) {
  EXPECT_EQ(real_to_byte(0.5 / 255.0), 1);
  EXPECT_EQ(real_to_byte(1.5 / 255.0), 2);
  EXPECT_EQ(real_to_byte(-0.3), 0);
  EXPECT_EQ(real_to_byte(1.7), 255);
  EXPECT_EQ(clamp_to_byte(127.5), 128);
  EXPECT_EQ(clamp_to_byte(-4.0), 0);
  EXPECT_EQ(clamp_to_byte(300.0), 255);
}

TEST(Image, NormalizedValuesStayInUnitInterval) {
  const auto img = iqals::testing::textured_image(5);
  const auto v = img.normalized();
  ASSERT_EQ(v.size(), static_cast<std::size_t>(kImageBytes));
  for (double x : v) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
  EXPECT_EQ(Image::from_normalized(v), img);
}

TEST(Image, PlaneMajorLayoutMatchesCifarRecord) {
  std::vector<std::uint8_t> raw(kImageBytes);
  std::iota(raw.begin(), raw.end(), 0);
  const Image img(raw);
  EXPECT_EQ(img.at(0, 0, 1), 1);
  EXPECT_EQ(img.at(0, 1, 0), 32);
  EXPECT_EQ(img.at(1, 0, 0), static_cast<std::uint8_t>(1024 % 256));
  std::vector<float> hwc(kImageBytes);
  img.write_channel_last<float>(hwc);
  // pixel (0,1): R, G, B follow each other
  EXPECT_FLOAT_EQ(hwc[3], 1 / 255.0f);
  EXPECT_FLOAT_EQ(hwc[4], static_cast<float>((1024 + 1) % 256) / 255.0f);
}

TEST(Image, LuminanceUsesRec601Weights) {
  const auto img = Image::filled(200, 100, 50);
  const auto y = luminance(img);
  for (double v : y) EXPECT_NEAR(v, 0.299 * 200 + 0.587 * 100 + 0.114 * 50, 1e-12);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, MixSeedIsOrderSensitive) {
  EXPECT_NE(mix_seed({1, 2}), mix_seed({2, 1}));
  EXPECT_EQ(mix_seed({1, 2, 3}), mix_seed({1, 2, 3}));
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(7);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, TruncatedNormalStaysWithinTwoSigma) {
  Rng rng(9);
  for (int i = 0; i < 100000; ++i) EXPECT_LE(std::abs(rng.truncated_normal()), 2.0);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(11);
  std::vector<int> v(1000);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(std::span(w));
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto k = rng.uniform_index(7);
    ASSERT_LT(k, 7u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Digest, Sha256KnownAnswer) {
  EXPECT_EQ(Sha256().update(std::string_view("abc")).hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Parallel, VisitsEveryIndexOnceAndPropagatesErrors) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, 4);
  EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  EXPECT_THROW(parallel_for(
                   10, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }, 3),
               std::runtime_error);
}

}  // namespace
