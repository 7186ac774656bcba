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

// Checkpoint layout:
//   u64 little-endian   N = byte length of the JSON header
//   N bytes             JSON header:
//                         {"format": "tabret-checkpoint", "version": 1,
//                          "dtype": "float32", "metadata": {...},
//                          "tensors": [{"name", "shape", "offset"}, ...]}
//                       offsets count 32-bit values from the start of the data
//   rest                little-endian float32 values, tensors back to back

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabret/tensor.hpp"

namespace tabret {

struct NamedTensorRef {
  std::string name;
  const Tensor<float>* tensor;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensorRef> tensors,
                     const nlohmann::json& metadata = nlohmann::json::object());

/// Throws DataError on truncated files, bad headers or overlapping ranges.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tabret
