#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "gebc/common.hpp"

namespace gebc {

// Dense row-major tensor. Model code keeps everything 2-D [rows, cols];
// corpus tensors (frames, masks) use 3-D / 2-D shapes as declared.
template <typename T>
struct Tensor {
  std::vector<size_t> dims;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> d) : dims(std::move(d)) {
    data.assign(numel(), T{});
  }
  Tensor(std::vector<size_t> d, std::vector<T> v)
      : dims(std::move(d)), data(std::move(v)) {
    if (data.size() != numel()) throw DataError("tensor data/shape mismatch");
  }

  size_t numel() const {
    size_t n = 1;
    for (size_t d : dims) n *= d;
    return n;
  }
  size_t rows() const { return dims.empty() ? 0 : dims[0]; }
  size_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }

  T& at(size_t r, size_t c) { return data[r * cols() + c]; }
  const T& at(size_t r, size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return dims == o.dims; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  static Tensor zeros(size_t r, size_t c) { return Tensor({r, c}); }
};

template <typename T>
inline std::string shape_str(const Tensor<T>& t) {
  std::string s = "[";
  for (size_t i = 0; i < t.dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.dims[i]);
  }
  return s + "]";
}

template <typename To, typename From>
inline Tensor<To> cast(const Tensor<From>& t) {
  Tensor<To> out;
  out.dims = t.dims;
  out.data.reserve(t.data.size());
  for (From v : t.data) out.data.push_back(static_cast<To>(v));
  return out;
}

}  // namespace gebc
