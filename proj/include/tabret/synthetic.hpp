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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabret/table.hpp"

namespace tabret {

struct SyntheticSpec {
  int table_count = 200;
  int min_rows = 3;
  int max_rows = 8;
  int min_cols = 3;  // including the entity name column
  int max_cols = 5;
  int entity_vocab_size = 4000;
  int attribute_vocab_size = 40;
  int questions_per_table = 2;
  double numeric_column_fraction = 0.3;
  double test_fraction = 0.25;
  uint64_t seed = 13;

  /// Throws std::invalid_argument on non-positive counts, inverted ranges or
  /// fractions outside [0,1].
  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
  /// Hex digest of the canonical JSON form.
  std::string hash() const;
};

struct SyntheticData {
  Corpus corpus;
  std::vector<Question> train;
  std::vector<Question> test;
};

/// Error for specs that cannot be satisfied (e.g. too few entity names).
class InfeasibleSpec : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tables "list of <category> by <attribute>" with an entity name column and
/// attribute columns (some numeric); questions "what is the <attribute> of
/// <entity>" whose answer cell occurs in exactly one table. Pure function of
/// the SyntheticSpec.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace tabret
