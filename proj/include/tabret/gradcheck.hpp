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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tabret/tensor.hpp"

namespace tabret {

struct GradProbe {
  size_t tensor = 0;
  size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double relative_error = 0;
};

struct GradCheckResult {
  double max_relative_error = 0;
  std::vector<GradProbe> probes;
};

/// Evaluates the loss at the current parameter values. When `backward` is
/// true it must also accumulate d(loss)/d(param) into each Tensor::grad
/// (which the checker zeroes beforehand).
using LossFn = std::function<double(bool backward)>;

/// Compares analytic gradients against central differences
/// (f(x+eps) - f(x-eps)) / 2eps at `probe_count` coordinates, picking a
/// tensor uniformly and then a coordinate uniformly inside it. Relative
/// error uses max(|analytic|, |numeric|, 1e-8) as denominator.
/// Throws std::domain_error if the loss is not finite.
GradCheckResult finite_diff_check(const LossFn& loss_fn, std::span<Tensor<double>* const> params, int probe_count,
                                  double eps, uint64_t seed = 0);

}  // namespace tabret
