#ifndef IQALS_NN_NETWORK_HPP
#define IQALS_NN_NETWORK_HPP

// The two-convolution classifier:
//
//   conv1 5x5/1 -> ReLU -> maxpool 3x3/2 -> LRN
//   conv2 5x5/1 -> ReLU -> LRN -> maxpool 3x3/2
//   flatten -> fc1 -> ReLU -> fc2 -> ReLU -> linear -> softmax
//
// Architecture::standard() gives the CIFAR-10 sizes (32x32x3 input, 64 conv
// channels, 384 and 192 hidden units, 10 classes); smaller instances exist for
// gradient checking.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iqals/digest.hpp"
#include "iqals/image.hpp"
#include "iqals/nn/labels.hpp"
#include "iqals/nn/layers.hpp"
#include "iqals/nn/tensor.hpp"
#include "iqals/rng.hpp"

namespace iqals::nn {

struct Architecture {
  int input_size = 32;
  int input_channels = 3;
  int kernel_size = 5;
  int conv1_channels = 64;
  int conv2_channels = 64;
  int pool_window = 3;
  int pool_stride = 2;
  int fc1_units = 384;
  int fc2_units = 192;
  int classes = kNumClasses;
  LrnParams lrn;

  static Architecture standard() { return {}; }

  int pool1_size() const { return same_pool_extent(input_size, pool_stride); }
  int pool2_size() const { return same_pool_extent(pool1_size(), pool_stride); }
  int flat_features() const { return pool2_size() * pool2_size() * conv2_channels; }

  std::string describe() const {
    char buf[384];
    std::snprintf(buf, sizeof buf,
                  "input=%dx%dx%d kernel=%d conv1=%d conv2=%d pool=%d/%d fc1=%d fc2=%d "
                  "classes=%d lrn=%d/%.17g/%.17g/%.17g",
                  input_size, input_size, input_channels, kernel_size, conv1_channels,
                  conv2_channels, pool_window, pool_stride, fc1_units, fc2_units, classes,
                  lrn.depth_radius, lrn.bias, lrn.alpha, lrn.beta);
    return buf;
  }

  std::uint64_t hash() const { return fnv1a64(describe()); }

  friend bool operator==(const Architecture& a, const Architecture& b) {
    return a.describe() == b.describe();
  }
};

inline constexpr const char* kInitScheme =
    "truncated-normal(2sd) conv sd=0.05 fc1/fc2 sd=0.04 softmax sd=0.004; "
    "bias conv1=0 conv2=0.1 fc1=0.1 fc2=0.1 softmax=0";

template <typename T>
struct ModelParams {
  Architecture arch;
  std::vector<T> conv1_w, conv1_b;
  std::vector<T> conv2_w, conv2_b;
  std::vector<T> fc1_w, fc1_b;
  std::vector<T> fc2_w, fc2_b;
  std::vector<T> out_w, out_b;
  // Bumped by every optimizer step; forward caches remember it.
  std::uint64_t version = 0;

  static ModelParams zeros(const Architecture& a) {
    ModelParams p;
    p.arch = a;
    const auto k2 = static_cast<std::size_t>(a.kernel_size * a.kernel_size);
    p.conv1_w.assign(k2 * a.input_channels * a.conv1_channels, T{0});
    p.conv1_b.assign(static_cast<std::size_t>(a.conv1_channels), T{0});
    p.conv2_w.assign(k2 * a.conv1_channels * a.conv2_channels, T{0});
    p.conv2_b.assign(static_cast<std::size_t>(a.conv2_channels), T{0});
    p.fc1_w.assign(static_cast<std::size_t>(a.flat_features()) * a.fc1_units, T{0});
    p.fc1_b.assign(static_cast<std::size_t>(a.fc1_units), T{0});
    p.fc2_w.assign(static_cast<std::size_t>(a.fc1_units) * a.fc2_units, T{0});
    p.fc2_b.assign(static_cast<std::size_t>(a.fc2_units), T{0});
    p.out_w.assign(static_cast<std::size_t>(a.fc2_units) * a.classes, T{0});
    p.out_b.assign(static_cast<std::size_t>(a.classes), T{0});
    return p;
  }

  // Visits every tensor in declaration order.
  template <typename F>
  void for_each(F&& f) {
    f("conv1_w", conv1_w);
    f("conv1_b", conv1_b);
    f("conv2_w", conv2_w);
    f("conv2_b", conv2_b);
    f("fc1_w", fc1_w);
    f("fc1_b", fc1_b);
    f("fc2_w", fc2_w);
    f("fc2_b", fc2_b);
    f("out_w", out_w);
    f("out_b", out_b);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](const char* name, std::vector<T>& v) { f(name, static_cast<const std::vector<T>&>(v)); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const char*, const std::vector<T>& v) { n += v.size(); });
    return n;
  }

  template <typename U>
  ModelParams<U> cast() const {
    auto out = ModelParams<U>::zeros(arch);
    std::vector<const std::vector<T>*> src;
    for_each([&](const char*, const std::vector<T>& v) { src.push_back(&v); });
    std::size_t i = 0;
    out.for_each([&](const char*, std::vector<U>& v) {
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = static_cast<U>((*src[i])[j]);
      ++i;
    });
    out.version = version;
    return out;
  }
};

template <typename T>
ModelParams<T> initialize(const Architecture& arch, std::uint64_t seed) {
  auto p = ModelParams<T>::zeros(arch);
  Rng rng(mix_seed({seed, 0x1A17ULL}));
  auto fill = [&](std::vector<T>& v, double sd) {
    for (T& x : v) x = static_cast<T>(sd * rng.truncated_normal());
  };
  fill(p.conv1_w, 0.05);
  fill(p.conv2_w, 0.05);
  fill(p.fc1_w, 0.04);
  fill(p.fc2_w, 0.04);
  fill(p.out_w, 0.004);
  std::fill(p.conv2_b.begin(), p.conv2_b.end(), static_cast<T>(0.1));
  std::fill(p.fc1_b.begin(), p.fc1_b.end(), static_cast<T>(0.1));
  std::fill(p.fc2_b.begin(), p.fc2_b.end(), static_cast<T>(0.1));
  return p;
}

template <typename T>
struct ForwardCache {
  std::uint64_t arch_hash = 0;
  std::uint64_t params_version = 0;
  Tensor<T> input;
  Tensor<T> conv1_pre, conv1_act;
  PoolResult<T> pool1;
  LrnResult<T> lrn1;
  Tensor<T> conv2_pre, conv2_act;
  LrnResult<T> lrn2;
  PoolResult<T> pool2;
  Tensor<T> fc1_pre, fc1_act;
  Tensor<T> fc2_pre, fc2_act;
  Tensor<T> logits;
  std::vector<double> probs;  // batch x classes, row-major

  int batch() const { return input.batch(); }
  int classes() const { return logits.channels(); }

  std::span<const double> probabilities(int n) const {
    return std::span(probs).subspan(static_cast<std::size_t>(n * classes()),
                                    static_cast<std::size_t>(classes()));
  }
  ProbDistribution distribution(int n) const {
    const auto p = probabilities(n);
    return {std::vector<double>(p.begin(), p.end())};
  }
  int predicted_class(int n) const {
    const auto p = probabilities(n);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  // Output shape of each stage, in execution order.
  std::vector<std::pair<std::string, Shape>> layer_shapes() const {
    return {{"input", input.shape()},
            {"conv1", conv1_act.shape()},
            {"pool1", pool1.output.shape()},
            {"lrn1", lrn1.output.shape()},
            {"conv2", conv2_act.shape()},
            {"lrn2", lrn2.output.shape()},
            {"pool2", pool2.output.shape()},
            {"flatten", {batch(), 1, 1, static_cast<int>(pool2.output.item_size())}},
            {"fc1", fc1_act.shape()},
            {"fc2", fc2_act.shape()},
            {"softmax", logits.shape()}};
  }
};

template <typename T>
ForwardCache<T> forward(const ModelParams<T>& params, Tensor<T> batch) {
  const Architecture& a = params.arch;
  require_shape(batch.shape(), {batch.batch(), a.input_size, a.input_size, a.input_channels},
                "input");
  if (batch.batch() <= 0) throw StructuralError("input: empty batch");
  ForwardCache<T> c;
  c.arch_hash = a.hash();
  c.params_version = params.version;
  c.input = std::move(batch);

  c.conv1_pre = conv2d_forward<T>(c.input, params.conv1_w, params.conv1_b, a.kernel_size,
                                  a.conv1_channels);
  c.conv1_act = relu_forward(c.conv1_pre);
  c.pool1 = maxpool_forward(c.conv1_act, a.pool_window, a.pool_stride);
  c.lrn1 = lrn_forward(c.pool1.output, a.lrn);

  c.conv2_pre = conv2d_forward<T>(c.lrn1.output, params.conv2_w, params.conv2_b, a.kernel_size,
                                  a.conv2_channels);
  c.conv2_act = relu_forward(c.conv2_pre);
  c.lrn2 = lrn_forward(c.conv2_act, a.lrn);
  c.pool2 = maxpool_forward(c.lrn2.output, a.pool_window, a.pool_stride);
  if (static_cast<int>(c.pool2.output.item_size()) != a.flat_features()) {
    throw StructuralError("flatten: feature count does not match fc1 input");
  }

  c.fc1_pre = dense_forward<T>(c.pool2.output, params.fc1_w, params.fc1_b, a.fc1_units);
  c.fc1_act = relu_forward(c.fc1_pre);
  c.fc2_pre = dense_forward<T>(c.fc1_act, params.fc2_w, params.fc2_b, a.fc2_units);
  c.fc2_act = relu_forward(c.fc2_pre);
  c.logits = dense_forward<T>(c.fc2_act, params.out_w, params.out_b, a.classes);

  const int n = c.batch();
  c.probs.resize(static_cast<std::size_t>(n * a.classes));
  std::vector<double> z(static_cast<std::size_t>(a.classes));
  for (int i = 0; i < n; ++i) {
    const auto row = c.logits.item(i);
    std::copy(row.begin(), row.end(), z.begin());
    const auto p = softmax(z);
    std::copy(p.begin(), p.end(), c.probs.begin() + static_cast<std::ptrdiff_t>(i * a.classes));
  }
  return c;
}

struct BackwardOptions {
  double weight_decay = 0.004;  // coefficient of 0.5*||w||^2 on fc1/fc2 weights
  LossKind loss = LossKind::kSquaredError;
};

template <typename T>
struct BackwardResult {
  ModelParams<T> gradients;
  double data_loss = 0.0;     // mean per-sample loss
  double penalty = 0.0;       // weight-decay term
  double total_loss() const { return data_loss + penalty; }
};

// Mean batch loss against the targets plus 0.5 * wd * (|fc1_w|^2 + |fc2_w|^2).
template <typename T>
double objective(const ModelParams<T>& params, const ForwardCache<T>& cache,
                 std::span<const ProbDistribution> targets, const BackwardOptions& opt) {
  double data = 0.0;
  for (int n = 0; n < cache.batch(); ++n) {
    data += sample_loss(opt.loss, cache.probabilities(n), targets[static_cast<std::size_t>(n)].probs);
  }
  double sq = 0.0;
  for (T w : params.fc1_w) sq += static_cast<double>(w) * w;
  for (T w : params.fc2_w) sq += static_cast<double>(w) * w;
  return data / cache.batch() + 0.5 * opt.weight_decay * sq;
}

template <typename T>
BackwardResult<T> backward(const ModelParams<T>& params, const ForwardCache<T>& cache,
                           std::span<const ProbDistribution> targets,
                           const BackwardOptions& opt = {}) {
  const Architecture& a = params.arch;
  if (cache.arch_hash != a.hash() || cache.params_version != params.version) {
    throw StructuralError("backward: forward cache is stale or from another model");
  }
  const int n = cache.batch();
  if (targets.size() != static_cast<std::size_t>(n)) {
    throw StructuralError("backward: target count differs from batch size");
  }
  BackwardResult<T> r{ModelParams<T>::zeros(a), 0.0, 0.0};
  auto& g = r.gradients;
  g.version = params.version;

  Tensor<T> dlogits(cache.logits.shape());
  for (int i = 0; i < n; ++i) {
    const auto& q = targets[static_cast<std::size_t>(i)];
    if (q.classes() != a.classes) throw StructuralError("backward: target has wrong class count");
    const auto p = cache.probabilities(i);
    r.data_loss += sample_loss(opt.loss, p, q.probs);
    const auto dz = loss_logit_gradient(opt.loss, p, q.probs);
    for (int k = 0; k < a.classes; ++k) {
      dlogits.at(i, 0, 0, k) = static_cast<T>(dz[static_cast<std::size_t>(k)] / n);
    }
  }
  r.data_loss /= n;

  Tensor<T> d;
  dense_backward<T>(cache.fc2_act, params.out_w, dlogits, g.out_w, g.out_b, &d);
  d = relu_backward(cache.fc2_pre, d);
  Tensor<T> d2;
  dense_backward<T>(cache.fc1_act, params.fc2_w, d, g.fc2_w, g.fc2_b, &d2);
  d2 = relu_backward(cache.fc1_pre, d2);
  Tensor<T> dflat;
  dense_backward<T>(cache.pool2.output, params.fc1_w, d2, g.fc1_w, g.fc1_b, &dflat);

  Tensor<T> dlrn2 = maxpool_backward(cache.pool2.argmax, dflat, cache.lrn2.output.shape());
  Tensor<T> dact2 = lrn_backward(cache.conv2_act, cache.lrn2, dlrn2, a.lrn);
  Tensor<T> dpre2 = relu_backward(cache.conv2_pre, dact2);
  Tensor<T> dlrn1;
  conv2d_backward<T>(cache.lrn1.output, params.conv2_w, dpre2, a.kernel_size, g.conv2_w, g.conv2_b,
                     &dlrn1);
  Tensor<T> dpool1 = lrn_backward(cache.pool1.output, cache.lrn1, dlrn1, a.lrn);
  Tensor<T> dact1 = maxpool_backward(cache.pool1.argmax, dpool1, cache.conv1_act.shape());
  Tensor<T> dpre1 = relu_backward(cache.conv1_pre, dact1);
  conv2d_backward<T>(cache.input, params.conv1_w, dpre1, a.kernel_size, g.conv1_w, g.conv1_b,
                     nullptr);

  double sq = 0.0;
  const T wd = static_cast<T>(opt.weight_decay);
  for (std::size_t i = 0; i < params.fc1_w.size(); ++i) {
    g.fc1_w[i] += wd * params.fc1_w[i];
    sq += static_cast<double>(params.fc1_w[i]) * params.fc1_w[i];
  }
  for (std::size_t i = 0; i < params.fc2_w.size(); ++i) {
    g.fc2_w[i] += wd * params.fc2_w[i];
    sq += static_cast<double>(params.fc2_w[i]) * params.fc2_w[i];
  }
  r.penalty = 0.5 * opt.weight_decay * sq;
  return r;
}

// Stacks 32x32 images into a channel-last (N, 32, 32, 3) batch in [0,1].
template <typename T>
Tensor<T> make_batch(std::span<const Image* const> images) {
  Tensor<T> batch({static_cast<int>(images.size()), kImageSize, kImageSize, kImageChannels});
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i]->write_channel_last(batch.item(static_cast<int>(i)));
  }
  return batch;
}

}  // namespace iqals::nn

#endif  // IQALS_NN_NETWORK_HPP
