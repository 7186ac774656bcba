// Copyright 2026 The tabret Authors
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

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabret {

using Shape = std::vector<size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline size_t numel(const Shape& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array with an optional gradient buffer. Used for model
/// parameters and for values moving in and out of a Tape.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty when absent

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(tabret::numel(shape), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != tabret::numel(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                       shape_str(shape));
    }
  }

  size_t numel() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const { return shape.at(i); }
  bool has_grad() const { return !grad.empty(); }

  void zero_grad() {
    if (requires_grad) grad.assign(data.size(), T(0));
  }

  T& at(size_t i, size_t j) { return data[i * shape[1] + j]; }
  const T& at(size_t i, size_t j) const { return data[i * shape[1] + j]; }
};

}  // namespace tabret
