// Layer-by-layer gradient checks (double precision) and forward oracles.

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "iqals/nn/labels.hpp"
#include "iqals/nn/layers.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace {

using namespace iqals;
using namespace iqals::nn;
using iqals::testing::check_gradient;

Tensor<double> random_tensor(const Shape& s, std::uint64_t seed, double scale = 1.0) {
  Tensor<double> t(s);
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// L = sum_i c_i y_i, so dL/dy = c.
double weighted_sum(const Tensor<double>& y, const std::vector<double>& c) {
  return std::inner_product(y.values().begin(), y.values().end(), c.begin(), 0.0);
}

Tensor<double> as_tensor(const Shape& s, const std::vector<double>& v) {
  Tensor<double> t(s);
  std::copy(v.begin(), v.end(), t.values().begin());
  return t;
}

TEST(GradCheck, Convolution) {
  auto x = random_tensor({2, 6, 5, 3}, 1);
  const int k = 3, cout = 4;
  auto w = random_vector(static_cast<std::size_t>(k * k * 3 * cout), 2, 0.3);
  auto b = random_vector(static_cast<std::size_t>(cout), 3);
  const auto y0 = conv2d_forward<double>(x, w, b, k, cout);
  const auto c = random_vector(y0.size(), 4);
  std::vector<double> dw(w.size(), 0.0), db(b.size(), 0.0);
  Tensor<double> dx;
  conv2d_backward<double>(x, w, as_tensor(y0.shape(), c), k, dw, db, &dx);
  auto f = [&] { return weighted_sum(conv2d_forward<double>(x, w, b, k, cout), c); };
  for (const auto& r : {check_gradient(w, dw, f), check_gradient(b, db, f),
                        check_gradient(x.values(), dx.values(), f)}) {
    EXPECT_TRUE(r.passed()) << "worst " << r.worst << " at " << r.worst_index;
  }
}

TEST(GradCheck, ConvolutionAccumulatesIntoGradients) {
  auto x = random_tensor({1, 4, 4, 2}, 5);
  auto w = random_vector(3 * 3 * 2 * 2, 6);
  std::vector<double> b(2, 0.0);
  const auto y = conv2d_forward<double>(x, w, b, 3, 2);
  Tensor<double> g(y.shape(), 1.0);
  std::vector<double> dw(w.size(), 0.0), db(2, 0.0), dw2(w.size(), 0.0), db2(2, 0.0);
  conv2d_backward<double>(x, w, g, 3, dw, db, nullptr);
  conv2d_backward<double>(x, w, g, 3, dw2, db2, nullptr);
  conv2d_backward<double>(x, w, g, 3, dw2, db2, nullptr);
  for (std::size_t i = 0; i < dw.size(); ++i) EXPECT_NEAR(dw2[i], 2 * dw[i], 1e-12);
}

TEST(GradCheck, Relu) {
  auto x = random_tensor({2, 3, 3, 4}, 7);
  for (auto& v : x.values())
    if (std::abs(v) < 1e-3) v = 0.5;  // keep clear of the kink
  const auto c = random_vector(x.size(), 8);
  const auto dx = relu_backward(x, as_tensor(x.shape(), c));
  auto f = [&] { return weighted_sum(relu_forward(x), c); };
  const auto r = check_gradient(x.values(), dx.values(), f);
  EXPECT_TRUE(r.passed()) << r.worst;
}

TEST(GradCheck, MaxPoolSamePadding) {
  for (const Shape& s : {Shape{2, 7, 7, 3}, Shape{1, 8, 8, 2}, Shape{1, 4, 4, 2}}) {
    auto x = random_tensor(s, 9);
    const auto fwd = maxpool_forward(x, 3, 2);
    const auto c = random_vector(fwd.output.size(), 10);
    const auto dx = maxpool_backward(fwd.argmax, as_tensor(fwd.output.shape(), c), x.shape());
    auto f = [&] { return weighted_sum(maxpool_forward(x, 3, 2).output, c); };
    const auto r = check_gradient(x.values(), dx.values(), f);
    EXPECT_TRUE(r.passed()) << to_string(s) << " worst " << r.worst;
  }
}

TEST(MaxPool, SamePaddingHalvesExtent) {
  EXPECT_EQ(same_pool_extent(32, 2), 16);
  EXPECT_EQ(same_pool_extent(16, 2), 8);
  EXPECT_EQ(same_pool_extent(7, 2), 4);
  Tensor<double> x({1, 4, 4, 1});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const auto r = maxpool_forward(x, 3, 2);
  // 4 -> 2 with padding only after: windows rows/cols {0..2} and {2..3}
  EXPECT_EQ(r.output.at(0, 0, 0, 0), 10.0);
  EXPECT_EQ(r.output.at(0, 0, 1, 0), 11.0);
  EXPECT_EQ(r.output.at(0, 1, 1, 0), 15.0);
}

TEST(GradCheck, LocalResponseNormalization) {
  // The default constants barely perturb the identity; a larger alpha
  // exercises the cross-channel term of the gradient.
  LrnParams strong{2, 1.5, 0.2, 0.75};
  for (const LrnParams& p : {LrnParams{}, strong}) {
    auto x = random_tensor({2, 3, 3, 7}, 11, 2.0);
    const auto fwd = lrn_forward(x, p);
    const auto c = random_vector(x.size(), 12);
    const auto dx = lrn_backward(x, fwd, as_tensor(x.shape(), c), p);
    auto f = [&] { return weighted_sum(lrn_forward(x, p).output, c); };
    const auto r = check_gradient(x.values(), dx.values(), f);
    EXPECT_TRUE(r.passed()) << "alpha " << p.alpha << " worst " << r.worst;
  }
}

TEST(Lrn, ForwardMatchesDefinition) {
  LrnParams p;
  auto x = random_tensor({2, 4, 4, 64}, 13, 3.0);
  const auto got = lrn_forward(x, p).output;
  const auto want = oracle::brute_force_lrn(std::vector<double>(x.values().begin(), x.values().end()),
                                            64, p.depth_radius, p.bias, p.alpha, p.beta);
  for (std::size_t i = 0; i < want.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12);
}

TEST(Lrn, DefaultConstants) {
  const LrnParams p;
  EXPECT_EQ(p.depth_radius, 4);
  EXPECT_DOUBLE_EQ(p.bias, 1.0);
  EXPECT_DOUBLE_EQ(p.alpha, 0.001 / 9.0);
  EXPECT_DOUBLE_EQ(p.beta, 0.75);
}

TEST(GradCheck, Dense) {
  auto x = random_tensor({3, 1, 1, 5}, 14);
  auto w = random_vector(5 * 4, 15);
  auto b = random_vector(4, 16);
  const auto y = dense_forward<double>(x, w, b, 4);
  const auto c = random_vector(y.size(), 17);
  std::vector<double> dw(w.size(), 0.0), db(b.size(), 0.0);
  Tensor<double> dx;
  dense_backward<double>(x, w, as_tensor(y.shape(), c), dw, db, &dx);
  auto f = [&] { return weighted_sum(dense_forward<double>(x, w, b, 4), c); };
  for (const auto& r : {check_gradient(w, dw, f), check_gradient(b, db, f),
                        check_gradient(x.values(), dx.values(), f)}) {
    EXPECT_TRUE(r.passed()) << r.worst;
  }
}

TEST(GradCheck, SoftmaxWithBothLosses) {
  for (LossKind kind : {LossKind::kSquaredError, LossKind::kCrossEntropy}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto z = random_vector(10, 20 + seed, 2.0);
      const auto q = smooth_labels(static_cast<int>(seed), 0.3 + 0.1 * static_cast<double>(seed));
      const auto g = loss_logit_gradient(kind, softmax(z), q.probs);
      auto f = [&] { return sample_loss(kind, softmax(z), q.probs); };
      const auto r = check_gradient(z, g, f);
      EXPECT_TRUE(r.passed()) << to_string(kind) << " worst " << r.worst;
    }
  }
}

TEST(Softmax, ValidAndShiftInvariant) {
  Rng rng(30);
  for (int t = 0; t < 100; ++t) {
    auto z = random_vector(10, 100 + static_cast<std::uint64_t>(t), 5.0);
    const auto p = softmax(z);
    double sum = 0;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    const double shift = 100.0 * (rng.uniform() - 0.5);
    for (double& v : z) v += shift;
    const auto p2 = softmax(z);
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], p2[k], 1e-9);
  }
}

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(require_shape({1, 2, 3, 4}, {1, 2, 3, 5}, "test"), StructuralError);
  Tensor<float> t({2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.item_size(), 60u);
  EXPECT_TRUE(t.all_finite());
  t[7] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
  std::vector<double> w(3 * 3 * 2 * 3), b(2);
  EXPECT_THROW(conv2d_forward<double>(Tensor<double>({1, 4, 4, 2}), w, b, 3, 2), StructuralError);
}

}  // namespace
