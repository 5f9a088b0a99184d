#ifndef IQALS_NN_LAYERS_HPP
#define IQALS_NN_LAYERS_HPP

// Forward and backward kernels for the layer types of the classifier. All
// tensors are channel-last; convolution kernels are laid out as
// (ky, kx, in_channel, out_channel) and dense weights as (in, out).
// Backward functions accumulate into parameter gradients.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "iqals/nn/tensor.hpp"

namespace iqals::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// ---------------------------------------------------------------------------
// Convolution, stride 1, "same" padding (TensorFlow placement: the extra pad
// for even kernels goes after).

namespace detail {

template <typename T>
void im2col(std::span<const T> image, int rows, int cols, int channels, int kernel,
            RowMatrix<T>& col) {
  const int pad = (kernel - 1) / 2;
  col.resize(rows * cols, kernel * kernel * channels);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      T* dst = col.row(y * cols + x).data();
      for (int ky = 0; ky < kernel; ++ky) {
        const int sy = y + ky - pad;
        for (int kx = 0; kx < kernel; ++kx) {
          const int sx = x + kx - pad;
          if (sy < 0 || sy >= rows || sx < 0 || sx >= cols) {
            std::fill_n(dst, channels, T{0});
          } else {
            const T* src = image.data() + (static_cast<std::size_t>(sy) * cols + sx) * channels;
            std::copy_n(src, channels, dst);
          }
          dst += channels;
        }
      }
    }
}

template <typename T>
void col2im_add(const RowMatrix<T>& col, int rows, int cols, int channels, int kernel,
                std::span<T> image) {
  const int pad = (kernel - 1) / 2;
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      const T* src = col.row(y * cols + x).data();
      for (int ky = 0; ky < kernel; ++ky) {
        const int sy = y + ky - pad;
        for (int kx = 0; kx < kernel; ++kx) {
          const int sx = x + kx - pad;
          if (sy >= 0 && sy < rows && sx >= 0 && sx < cols) {
            T* dst = image.data() + (static_cast<std::size_t>(sy) * cols + sx) * channels;
            for (int c = 0; c < channels; ++c) dst[c] += src[c];
          }
          src += channels;
        }
      }
    }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, std::span<const T> kernel, std::span<const T> bias,
                         int kernel_size, int out_channels) {
  const int cin = x.channels();
  const int taps = kernel_size * kernel_size * cin;
  if (kernel.size() != static_cast<std::size_t>(taps) * out_channels ||
      bias.size() != static_cast<std::size_t>(out_channels)) {
    throw StructuralError("conv: kernel/bias size does not match input channels");
  }
  Tensor<T> y({x.batch(), x.rows(), x.cols(), out_channels});
  ConstMatrixMap<T> w(kernel.data(), taps, out_channels);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(), out_channels);
  RowMatrix<T> col;
  for (int n = 0; n < x.batch(); ++n) {
    detail::im2col(x.item(n), x.rows(), x.cols(), cin, kernel_size, col);
    MatrixMap<T> out(y.item(n).data(), x.rows() * x.cols(), out_channels);
    out.noalias() = col * w;
    out.rowwise() += b;
  }
  return y;
}

// dx may be null when the input gradient is not needed.
template <typename T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> kernel, const Tensor<T>& dy,
                     int kernel_size, std::span<T> dkernel, std::span<T> dbias, Tensor<T>* dx) {
  const int cin = x.channels();
  const int cout = dy.channels();
  const int taps = kernel_size * kernel_size * cin;
  ConstMatrixMap<T> w(kernel.data(), taps, cout);
  MatrixMap<T> dw(dkernel.data(), taps, cout);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(dbias.data(), cout);
  if (dx) *dx = Tensor<T>(x.shape());
  RowMatrix<T> col;
  RowMatrix<T> dcol;
  for (int n = 0; n < x.batch(); ++n) {
    detail::im2col(x.item(n), x.rows(), x.cols(), cin, kernel_size, col);
    ConstMatrixMap<T> g(dy.item(n).data(), x.rows() * x.cols(), cout);
    dw.noalias() += col.transpose() * g;
    db += g.colwise().sum();
    if (dx) {
      dcol.noalias() = g * w.transpose();
      detail::col2im_add(dcol, x.rows(), x.cols(), cin, kernel_size, dx->item(n));
    }
  }
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

// Gradient gated on the pre-activation.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& pre, const Tensor<T>& dy) {
  Tensor<T> dx(pre.shape());
  for (std::size_t i = 0; i < pre.size(); ++i) dx[i] = pre[i] > T{0} ? dy[i] : T{0};
  return dx;
}

// ---------------------------------------------------------------------------
// Max pooling with "same" padding: out = ceil(in / stride), padded cells never
// win.

inline int same_pool_extent(int in, int stride) { return (in + stride - 1) / stride; }

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

template <typename T>
PoolResult<T> maxpool_forward(const Tensor<T>& x, int window, int stride) {
  const int oh = same_pool_extent(x.rows(), stride);
  const int ow = same_pool_extent(x.cols(), stride);
  const int pad_top = std::max((oh - 1) * stride + window - x.rows(), 0) / 2;
  const int pad_left = std::max((ow - 1) * stride + window - x.cols(), 0) / 2;
  PoolResult<T> r{Tensor<T>({x.batch(), oh, ow, x.channels()}), {}};
  r.argmax.resize(r.output.size());
  for (int n = 0; n < x.batch(); ++n)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int c = 0; c < x.channels(); ++c) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_index = 0;
          for (int ky = 0; ky < window; ++ky) {
            const int sy = oy * stride + ky - pad_top;
            if (sy < 0 || sy >= x.rows()) continue;
            for (int kx = 0; kx < window; ++kx) {
              const int sx = ox * stride + kx - pad_left;
              if (sx < 0 || sx >= x.cols()) continue;
              const std::size_t i = x.index(n, sy, sx, c);
              if (x[i] > best) {
                best = x[i];
                best_index = i;
              }
            }
          }
          const std::size_t o = r.output.index(n, oy, ox, c);
          r.output[o] = best;
          r.argmax[o] = static_cast<std::uint32_t>(best_index);
        }
  return r;
}

template <typename T>
Tensor<T> maxpool_backward(const std::vector<std::uint32_t>& argmax, const Tensor<T>& dy,
                           const Shape& input_shape) {
  Tensor<T> dx(input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
  return dx;
}

// ---------------------------------------------------------------------------
// Local response normalization across channels:
//   out[c] = x[c] / (bias + alpha * sum_{|c'-c| <= radius} x[c']^2)^beta

struct LrnParams {
  int depth_radius = 4;
  double bias = 1.0;
  double alpha = 0.001 / 9.0;
  double beta = 0.75;
};

template <typename T>
struct LrnResult {
  Tensor<T> output;
  Tensor<T> scale;  // bias + alpha * windowed sum of squares
};

template <typename T>
LrnResult<T> lrn_forward(const Tensor<T>& x, const LrnParams& p) {
  LrnResult<T> r{Tensor<T>(x.shape()), Tensor<T>(x.shape())};
  const int channels = x.channels();
  const std::size_t pixels = x.size() / static_cast<std::size_t>(channels);
  const T alpha = static_cast<T>(p.alpha);
  const T bias = static_cast<T>(p.bias);
  const T beta = static_cast<T>(p.beta);
  for (std::size_t px = 0; px < pixels; ++px) {
    const T* in = x.data() + px * channels;
    T* out = r.output.data() + px * channels;
    T* scale = r.scale.data() + px * channels;
    for (int c = 0; c < channels; ++c) {
      const int lo = std::max(0, c - p.depth_radius);
      const int hi = std::min(channels - 1, c + p.depth_radius);
      T sum{0};
      for (int j = lo; j <= hi; ++j) sum += in[j] * in[j];
      scale[c] = bias + alpha * sum;
      out[c] = in[c] * std::pow(scale[c], -beta);
    }
  }
  return r;
}

template <typename T>
Tensor<T> lrn_backward(const Tensor<T>& x, const LrnResult<T>& fwd, const Tensor<T>& dy,
                       const LrnParams& p) {
  Tensor<T> dx(x.shape());
  const int channels = x.channels();
  const std::size_t pixels = x.size() / static_cast<std::size_t>(channels);
  const T beta = static_cast<T>(p.beta);
  const T coeff = static_cast<T>(2.0 * p.alpha * p.beta);
  std::vector<T> t(static_cast<std::size_t>(channels));
  for (std::size_t px = 0; px < pixels; ++px) {
    const T* in = x.data() + px * channels;
    const T* out = fwd.output.data() + px * channels;
    const T* scale = fwd.scale.data() + px * channels;
    const T* g = dy.data() + px * channels;
    T* d = dx.data() + px * channels;
    // t_i = g_i * x_i * s_i^(-beta-1) = g_i * out_i / s_i
    for (int i = 0; i < channels; ++i) t[static_cast<std::size_t>(i)] = g[i] * out[i] / scale[i];
    for (int j = 0; j < channels; ++j) {
      const int lo = std::max(0, j - p.depth_radius);
      const int hi = std::min(channels - 1, j + p.depth_radius);
      T sum{0};
      for (int i = lo; i <= hi; ++i) sum += t[static_cast<std::size_t>(i)];
      d[j] = g[j] * std::pow(scale[j], -beta) - coeff * in[j] * sum;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Fully connected: y = x W + b over the flattened per-item features.

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, std::span<const T> weights, std::span<const T> bias,
                        int out_features) {
  const int n = x.batch();
  const int in_features = static_cast<int>(x.item_size());
  if (weights.size() != static_cast<std::size_t>(in_features) * out_features ||
      bias.size() != static_cast<std::size_t>(out_features)) {
    throw StructuralError("dense: weight size does not match input features");
  }
  Tensor<T> y({n, 1, 1, out_features});
  ConstMatrixMap<T> in(x.data(), n, in_features);
  ConstMatrixMap<T> w(weights.data(), in_features, out_features);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(), out_features);
  MatrixMap<T> out(y.data(), n, out_features);
  out.noalias() = in * w;
  out.rowwise() += b;
  return y;
}

template <typename T>
void dense_backward(const Tensor<T>& x, std::span<const T> weights, const Tensor<T>& dy,
                    std::span<T> dweights, std::span<T> dbias, Tensor<T>* dx) {
  const int n = x.batch();
  const int in_features = static_cast<int>(x.item_size());
  const int out_features = static_cast<int>(dy.item_size());
  ConstMatrixMap<T> in(x.data(), n, in_features);
  ConstMatrixMap<T> w(weights.data(), in_features, out_features);
  ConstMatrixMap<T> g(dy.data(), n, out_features);
  MatrixMap<T> dw(dweights.data(), in_features, out_features);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(dbias.data(), out_features);
  dw.noalias() += in.transpose() * g;
  db += g.colwise().sum();
  if (dx) {
    *dx = Tensor<T>(x.shape());
    MatrixMap<T> d(dx->data(), n, in_features);
    d.noalias() = g * w.transpose();
  }
}

// ---------------------------------------------------------------------------
// Softmax, always evaluated in double precision.

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace iqals::nn

#endif  // IQALS_NN_LAYERS_HPP
