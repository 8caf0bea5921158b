// awe/tensorkit/tensor.hpp

// Copyright 2026  The awe-qbe Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "awe/common.hpp"

namespace awe::tk {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// Dense row-major tensor. T is float on the training path and double when
// checking gradients.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_size(shape))
      throw ShapeError(str_cat("tensor data size ", data.size(), " does not match shape ",
                               shape_str(shape)));
  }

  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t size() const { return data.size(); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T& operator[](std::size_t i) { return data[i]; }
  T operator[](std::size_t i) const { return data[i]; }

  // Rank-4 [B,C,F,T] and rank-2 [B,N] element access.
  T& at(std::size_t b, std::size_t c, std::size_t f, std::size_t t) {
    return data[((b * shape[1] + c) * shape[2] + f) * shape[3] + t];
  }
  T at(std::size_t b, std::size_t c, std::size_t f, std::size_t t) const {
    return data[((b * shape[1] + c) * shape[2] + f) * shape[3] + t];
  }
  T& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  T at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    std::transform(data.begin(), data.end(), out.data.begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool operator==(const Tensor&) const = default;
};

// Output-unit ranges, one per language. Contiguous, non-overlapping, and
// covering [0, total).
struct BlockLayout {
  std::vector<std::pair<std::size_t, std::size_t>> blocks;

  std::size_t total() const { return blocks.empty() ? 0 : blocks.back().second; }

  void validate() const {
    if (blocks.empty()) throw ValidationError("BlockLayout: no blocks");
    std::size_t expect = 0;
    for (const auto& [b, e] : blocks) {
      if (b != expect || e <= b)
        throw ValidationError(str_cat("BlockLayout: block [", b, ",", e,
                                      ") breaks contiguity (expected begin ", expect, ")"));
      expect = e;
    }
  }

  static BlockLayout single(std::size_t n) { return BlockLayout{{{0, n}}}; }
  bool operator==(const BlockLayout&) const = default;
};

}  // namespace awe::tk
