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

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation in creation order, which is a topological
// order of the computation graph; backward() walks it once in reverse. Values
// are held by the tape, except parameter leaves, which alias the caller's
// Tensor so that gradients accumulate straight into Tensor::grad.
//
// Instantiated for float (training) and double (gradient checking).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "tabret/rng.hpp"
#include "tabret/tensor.hpp"

namespace tabret {

template <typename T>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives and
/// has not been cleared.
template <typename T>
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  uint32_t id() const { return id_; }

  const Shape& shape() const;
  size_t numel() const;
  size_t rows() const { return shape().at(0); }
  size_t cols() const { return shape().at(1); }
  std::span<const T> value() const;
  /// Empty until backward has reached this node.
  std::span<const T> grad() const;
  T item() const;
  Tensor<T> to_tensor() const;

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, uint32_t id) : tape_(tape), id_(id) {}
  Tape<T>* tape_ = nullptr;
  uint32_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf aliasing a parameter. Repeated calls with the same tensor return
  /// the same node.
  Var<T> param(Tensor<T>& p);
  Var<T> constant(Tensor<T> value);
  /// Owned leaf that collects its own gradient.
  Var<T> variable(Tensor<T> value);

  /// Seeds d(root)/d(root) = 1 elementwise and propagates to every node
  /// that requires a gradient.
  void backward(Var<T> root);

  size_t size() const { return nodes_.size(); }
  void clear();

  // Op plumbing.
  Var<T> record(Shape shape, std::vector<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn);
  Var<T> record(Shape shape, std::vector<T> value, std::span<const Var<T>> inputs, BackwardFn fn);
  const Shape& shape(uint32_t id) const { return nodes_[id].shape; }
  std::span<const T> value(uint32_t id) const;
  std::span<const T> grad(uint32_t id) const;
  /// Zero-filled on first access.
  std::span<T> grad_buffer(uint32_t id);
  bool requires_grad(uint32_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Shape shape;
    std::vector<T> value;
    Tensor<T>* param = nullptr;
    std::vector<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  Var<T> push(Node node);

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor<T>*, uint32_t> param_ids_;
};

namespace ag {

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, T s);
/// x[m,n] + b[n] broadcast over rows.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> b);
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);
/// a[m,k] * b[n,k]^T
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b);
template <typename T>
Var<T> transpose(Var<T> a);
/// 2-D concatenation along axis 0 (rows) or 1 (columns).
template <typename T>
Var<T> concat(std::span<const Var<T>> parts, size_t axis);
/// 2-D slice [start, start+len) along axis 0 or 1.
template <typename T>
Var<T> slice(Var<T> a, size_t axis, size_t start, size_t len);
template <typename T>
Var<T> sum(Var<T> a);

/// Softmax over the last axis of (scores + additive_term). The term has the
/// shape of the scores or of their trailing dimensions (broadcast over the
/// leading ones) and may hold -inf; those entries come out exactly 0.
/// Throws std::domain_error if a row is entirely -inf.
template <typename T>
Var<T> softmax_masked(Var<T> scores, std::optional<Var<T>> additive_term = std::nullopt);

/// Row-wise over the last axis. Throws std::invalid_argument if epsilon <= 0.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> offset, T epsilon);

/// Exact (erf) form.
template <typename T>
Var<T> gelu(Var<T> x);

/// Rows of table[V,H] picked by ids; throws std::out_of_range on a bad id.
template <typename T>
Var<T> embedding_lookup(Var<T> table, std::span<const int> ids);

/// out.flat[k] = src.flat[indices[k]]
template <typename T>
Var<T> gather(Var<T> src, std::span<const uint32_t> indices, Shape shape);

/// Inverted dropout; identity when !training or p == 0.
template <typename T>
Var<T> dropout(Var<T> x, T p, bool training, Rng& rng);

/// mean_i -log softmax(sim[i])[i] for sim[B, B+H]. Throws on B == 0.
template <typename T>
Var<T> contrastive_nll(Var<T> sim);

}  // namespace ag

}  // namespace tabret
