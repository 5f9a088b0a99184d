#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "iqals/distort.hpp"
#include "iqals/iqa.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace iqals;

Image inverted(const Image& img) {
  Image out;
  for (std::size_t i = 0; i < img.bytes().size(); ++i)
    out.bytes()[i] = static_cast<std::uint8_t>(255 - img.bytes()[i]);
  return out;
}

TEST(Ssim, SelfSimilarityIsOne) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    const auto img = iqals::testing::textured_image(k);
    const auto q = ssim(img, img);
    EXPECT_NEAR(q.raw, 1.0, 1e-9);
    EXPECT_EQ(q.transformed, transform_score(q.raw));
  }
}

TEST(Ssim, MatchesBruteForceWindowedOracle) {
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto ref = iqals::testing::textured_image(500 + k);
    const auto kind = kAllDistortionKinds[k % 3];
    const auto dist = apply(DistortionSpec::at_level(kind, static_cast<int>(k % 3) + 1), ref, k);
    EXPECT_NEAR(ssim(ref, dist).raw, oracle::brute_force_ssim(ref, dist), 1e-6) << k;
  }
}

TEST(Ssim, SymmetricInItsArguments) {
  const auto a = iqals::testing::textured_image(1);
  const auto b = gaussian_blur(a, 1.0);
  EXPECT_NEAR(ssim(a, b).raw, ssim(b, a).raw, 1e-12);
}

TEST(Ssim, InvertedTexturedImageScoresLow) {
  const auto img = iqals::testing::textured_image(21);
  EXPECT_LT(ssim(img, inverted(img)).raw, 0.5);
}

TEST(Ssim, StrongerBlurNeverScoresHigher) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    const auto img = iqals::testing::textured_image(2000 + k);
    EXPECT_LE(ssim(img, gaussian_blur(img, 1.2)).raw, ssim(img, gaussian_blur(img, 0.7)).raw) << k;
  }
}

TEST(Ssim, ValidWindowPlacementOnLuma) {
  // Only luma matters: swapping the red and blue planes of a grey image
  // changes nothing.
  const auto a = Image::filled(90, 90, 90);
  EXPECT_NEAR(ssim(a, a).raw, 1.0, 1e-12);
  std::vector<double> p(20 * 20, 0.0), q(20 * 20, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<double>((i * 37) % 255);
    q[i] = p[i] * 0.5 + 20.0;
  }
  EXPECT_LT(ssim_plane(p, q, 20, 20), 1.0);
  EXPECT_THROW(ssim_plane(p, q, 10, 40 * 2), ParameterError);
  std::vector<double> tiny(10 * 10, 1.0);
  EXPECT_THROW(ssim_plane(tiny, tiny, 10, 10), ParameterError);
}

TEST(Transform, IdentityClampAndBoundary) {
  EXPECT_DOUBLE_EQ(transform_score(0.75), 0.75);
  EXPECT_DOUBLE_EQ(transform_score(-0.2), 0.001);
  EXPECT_DOUBLE_EQ(transform_score(1.0), 1.0);
  EXPECT_DOUBLE_EQ(transform_score(1.0000001), 1.0);
  EXPECT_DOUBLE_EQ(transform_score(0.0), 0.001);
  EXPECT_DOUBLE_EQ(transform_score(0.001), 0.001);
}

TEST(Ssim, TransformedScoreAlwaysInUnitInterval) {
  const auto img = iqals::testing::textured_image(33);
  const auto q = ssim(img, inverted(img));
  EXPECT_GT(q.transformed, 0.0);
  EXPECT_LE(q.transformed, 1.0);
}

}  // namespace
