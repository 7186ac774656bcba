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

#include <cstdint>
#include <span>
#include <vector>

#include "tabret/tensor.hpp"

namespace tabret {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Throws std::invalid_argument on lr <= 0 or betas outside [0, 1).
  void validate() const;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  int64_t step = 0;
};

/// One bias-corrected Adam update over `params`, using each tensor's grad.
/// Tensors without a gradient buffer are skipped. The state is sized lazily
/// on the first call and must be reused with the same parameter list.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, AdamState<T>& state, const AdamConfig& config);

/// Scales all gradients so their joint L2 norm is at most max_norm. Returns
/// the norm before scaling.
template <typename T>
double clip_grad_norm(std::span<Tensor<T>* const> params, double max_norm);

template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>*> params, AdamConfig config);

  void step() { adam_step<T>(params_, state_, config_); }
  void zero_grad();
  int64_t steps_taken() const { return state_.step; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  std::vector<Tensor<T>*> params_;
  AdamConfig config_;
  AdamState<T> state_;
};

}  // namespace tabret
