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

#include "tabret/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tabret/rng.hpp"

namespace tabret {

namespace {

double checked(double v) {
  if (!std::isfinite(v)) throw std::domain_error("finite_diff_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const LossFn& loss_fn, std::span<Tensor<double>* const> params, int probe_count,
                                  double eps, uint64_t seed) {
  if (params.empty()) throw std::invalid_argument("finite_diff_check: no parameters");
  if (!(eps > 0)) throw std::invalid_argument("finite_diff_check: eps must be > 0");
  for (Tensor<double>* p : params) {
    p->requires_grad = true;
    p->grad.assign(p->numel(), 0.0);
  }
  checked(loss_fn(true));
  std::vector<std::vector<double>> analytic;
  for (Tensor<double>* p : params) analytic.push_back(p->grad);

  Rng rng = make_rng(seed, "gradcheck");
  std::vector<size_t> candidates;
  for (size_t k = 0; k < params.size(); ++k)
    if (params[k]->numel() > 0) candidates.push_back(k);

  GradCheckResult result;
  for (int i = 0; i < probe_count; ++i) {
    GradProbe probe;
    probe.tensor = candidates[std::uniform_int_distribution<size_t>(0, candidates.size() - 1)(rng)];
    Tensor<double>& p = *params[probe.tensor];
    probe.index = std::uniform_int_distribution<size_t>(0, p.numel() - 1)(rng);
    const double saved = p.data[probe.index];
    p.data[probe.index] = saved + eps;
    const double up = checked(loss_fn(false));
    p.data[probe.index] = saved - eps;
    const double down = checked(loss_fn(false));
    p.data[probe.index] = saved;
    probe.analytic = analytic[probe.tensor][probe.index];
    probe.numeric = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(probe.analytic), std::abs(probe.numeric), 1e-8});
    probe.relative_error = std::abs(probe.analytic - probe.numeric) / denom;
    result.max_relative_error = std::max(result.max_relative_error, probe.relative_error);
    result.probes.push_back(probe);
  }
  return result;
}

}  // namespace tabret
