#include <gtest/gtest.h>

#include "support/criteria.hpp"

namespace {

using namespace iqals::criteria;

// Reference accuracy rows (pristine, blur 1-3, noise 1-3, jpeg 1-3).
const AccuracyRow kRow1 = {0.794, 0.676, 0.524, 0.436, 0.677, 0.566, 0.392, 0.600, 0.529, 0.391};
const AccuracyRow kRow2 = {0.781, 0.777, 0.766, 0.751, 0.735, 0.681, 0.585, 0.669, 0.621, 0.469};
const AccuracyRow kRow3 = {0.798, 0.782, 0.766, 0.749, 0.749, 0.698, 0.607, 0.681, 0.624, 0.465};
const AccuracyRow kRow8 = {0.767, 0.753, 0.737, 0.721, 0.761, 0.744, 0.725, 0.721, 0.686, 0.599};
const AccuracyRow kRow9 = {0.790, 0.773, 0.753, 0.738, 0.771, 0.757, 0.731, 0.726, 0.692, 0.585};

TEST(DeskCheckers, AcceptTheReferenceRows) {
  EXPECT_TRUE(baseline_fragility(kRow1).pass) << baseline_fragility(kRow1).detail;
  EXPECT_TRUE(augmentation_robustness(kRow1, kRow2).pass);
  EXPECT_TRUE(pristine_recovery(kRow2, kRow3, kRow8, kRow9).pass);
}

TEST(DeskCheckers, RejectViolations) {
  auto weak = kRow1;
  weak[0] = 0.69;
  EXPECT_FALSE(baseline_fragility(weak).pass);
  auto robust = kRow1;
  robust[3] = 0.60;
  EXPECT_FALSE(baseline_fragility(robust).pass);
  EXPECT_FALSE(augmentation_robustness(kRow1, kRow1).pass);
  auto s3 = kRow3;
  s3[0] = kRow2[0] - 0.006;
  EXPECT_FALSE(pristine_recovery(kRow2, s3, kRow8, kRow9).pass);
  s3[0] = kRow2[0] - 0.004;
  EXPECT_TRUE(pristine_recovery(kRow2, s3, kRow8, kRow9).pass);
  EXPECT_FALSE(pristine_recovery(kRow2, kRow3, kRow9, kRow8).pass);
}

TEST(DeskCheckers, ConfidenceMustStrictlyDecrease) {
  EXPECT_TRUE(confidence_behavior({0.9, 0.8, 0.7, 0.6}).pass);
  EXPECT_FALSE(confidence_behavior({0.9, 0.8, 0.8, 0.6}).pass);
  EXPECT_FALSE(confidence_behavior({0.9, 0.95, 0.7, 0.6}).pass);
}

TEST(PropertyCriteria, CheapOnesPass) {
  for (const auto& v : {ssim_self_identity(), ssim_oracle_equivalence(), smoothing_validity(),
                        shape_conformance()})
    EXPECT_TRUE(v.pass) << v.detail;
}

}  // namespace
