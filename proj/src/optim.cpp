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

#include "tabret/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tabret {

void AdamConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("adam: learning rate must be > 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw std::invalid_argument("adam: betas must be in [0, 1)");
  if (!(epsilon > 0)) throw std::invalid_argument("adam: epsilon must be > 0");
}

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, AdamState<T>& state, const AdamConfig& config) {
  config.validate();
  if (state.first_moment.empty()) {
    for (const Tensor<T>* p : params) {
      state.first_moment.emplace_back(p->numel(), T(0));
      state.second_moment.emplace_back(p->numel(), T(0));
    }
  }
  if (state.first_moment.size() != params.size()) throw std::logic_error("adam: parameter list changed between steps");
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& p = *params[k];
    if (!p.has_grad()) continue;
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (size_t i = 0; i < p.numel(); ++i) {
      const T g = p.grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const double mhat = static_cast<double>(m[i]) / bc1;
      const double vhat = static_cast<double>(v[i]) / bc2;
      p.data[i] -= static_cast<T>(config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon));
    }
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  config_.validate();
}

template <typename T>
void Adam<T>::zero_grad() {
  for (Tensor<T>* p : params_) p->zero_grad();
}

template <typename T>
double clip_grad_norm(std::span<Tensor<T>* const> params, double max_norm) {
  if (!(max_norm > 0)) throw std::invalid_argument("clip_grad_norm: max_norm must be > 0");
  double sq = 0;
  for (const Tensor<T>* p : params) {
    for (T g : p->grad) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const auto s = static_cast<T>(max_norm / norm);
    for (Tensor<T>* p : params) {
      for (T& g : p->grad) g *= s;
    }
  }
  return norm;
}

template double clip_grad_norm<float>(std::span<Tensor<float>* const>, double);
template double clip_grad_norm<double>(std::span<Tensor<double>* const>, double);
template void adam_step<float>(std::span<Tensor<float>* const>, AdamState<float>&, const AdamConfig&);
template void adam_step<double>(std::span<Tensor<double>* const>, AdamState<double>&, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace tabret
