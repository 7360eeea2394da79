// Copyright 2026 The RSD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rsd/errors.hpp"

namespace rsd {

// Dense row-major tensor with a dynamic shape. Small and deliberately
// boring: storage is a std::vector, indexing is checked in debug builds.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, T fill = T{})
      : shape_(std::move(shape)), data_(count(shape_), fill) {
    compute_strides();
  }

  Tensor(std::vector<std::size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_)) {
      throw InternalError("tensor data size " + std::to_string(data_.size()) +
                          " does not match shape volume " +
                          std::to_string(count(shape_)));
    }
    compute_strides();
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  template <typename... Idx>
  T& operator()(Idx... idx) {
    return data_[offset(idx...)];
  }
  template <typename... Idx>
  const T& operator()(Idx... idx) const {
    return data_[offset(idx...)];
  }

  // Contiguous block addressed by a prefix of the indices, e.g. for a
  // [B, N, d] tensor, slice(b, n) is the d-vector at (b, n).
  template <typename... Idx>
  std::span<T> slice(Idx... idx) {
    const std::size_t k = sizeof...(Idx);
    return std::span<T>(data_).subspan(prefix_offset(idx...), strides_[k - 1]);
  }
  template <typename... Idx>
  std::span<const T> slice(Idx... idx) const {
    const std::size_t k = sizeof...(Idx);
    return std::span<const T>(data_).subspan(prefix_offset(idx...),
                                             strides_[k - 1]);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  void compute_strides() {
    strides_.assign(shape_.size(), 1);
    for (std::size_t i = shape_.size(); i-- > 1;) {
      strides_[i - 1] = strides_[i] * shape_[i];
    }
  }

  template <typename... Idx>
  std::size_t offset(Idx... idx) const {
#ifndef NDEBUG
    if (sizeof...(Idx) != shape_.size()) {
      throw InternalError("tensor rank mismatch");
    }
#endif
    return prefix_offset(idx...);
  }

  template <typename... Idx>
  std::size_t prefix_offset(Idx... idx) const {
    const std::size_t indices[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t i = 0; i < sizeof...(Idx); ++i) {
#ifndef NDEBUG
      if (indices[i] >= shape_[i]) throw InternalError("tensor index out of range");
#endif
      off += indices[i] * strides_[i];
    }
    return off;
  }

  std::vector<std::size_t> shape_;
  std::vector<std::size_t> strides_;
  std::vector<T> data_;
};

}  // namespace rsd
