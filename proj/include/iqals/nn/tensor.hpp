#ifndef IQALS_NN_TENSOR_HPP
#define IQALS_NN_TENSOR_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "iqals/error.hpp"

namespace iqals::nn {

// (batch, rows, cols, channels); lower-rank data uses 1 for unused axes.
using Shape = std::array<int, 4>;

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) +
         "," + std::to_string(s[3]) + ")";
}

inline std::size_t element_count(const Shape& s) {
  return static_cast<std::size_t>(s[0]) * s[1] * s[2] * s[3];
}

// Dense channel-last tensor.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(const Shape& shape, T fill = T{})
      : shape_(shape), values_(element_count(shape), fill) {}

  const Shape& shape() const { return shape_; }
  int batch() const { return shape_[0]; }
  int rows() const { return shape_[1]; }
  int cols() const { return shape_[2]; }
  int channels() const { return shape_[3]; }
  std::size_t size() const { return values_.size(); }
  // elements per batch item
  std::size_t item_size() const { return shape_[0] ? values_.size() / shape_[0] : 0; }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::span<T> item(int n) { return std::span(values_).subspan(n * item_size(), item_size()); }
  std::span<const T> item(int n) const {
    return std::span(values_).subspan(n * item_size(), item_size());
  }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  T& at(int n, int y, int x, int c) { return values_[index(n, y, x, c)]; }
  const T& at(int n, int y, int x, int c) const { return values_[index(n, y, x, c)]; }

  std::size_t index(int n, int y, int x, int c) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + y) * shape_[2] + x) * shape_[3] + c;
  }

  bool all_finite() const {
    for (const T& v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<T> values_;
};

inline void require_shape(const Shape& got, const Shape& want, const char* layer) {
  if (got != want) {
    throw StructuralError(std::string(layer) + ": expected input shape " + to_string(want) +
                          ", got " + to_string(got));
  }
}

}  // namespace iqals::nn

#endif  // IQALS_NN_TENSOR_HPP
