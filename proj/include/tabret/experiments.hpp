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

// Ablation grids over linearization perturbations and structure modes, and
// the report tables they produce.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabret/encoder.hpp"
#include "tabret/linearizer.hpp"
#include "tabret/retrieval.hpp"
#include "tabret/synthetic.hpp"

namespace tabret {

struct Condition {
  ShuffleMode shuffle = ShuffleMode::kNone;
  DelimiterMode delimiters = DelimiterMode::kAll;
  StructureMode structure = StructureMode::kNone;

  /// Linearization options for this condition; `seed` keys the shuffle.
  LinearizationOptions linearization(uint64_t seed) const;
  /// "proper" or e.g. "shuffle=both delimiters=none".
  std::string label() const;
  nlohmann::json to_json() const;
  static Condition from_json(const nlohmann::json& j);
  bool operator==(const Condition&) const = default;
};

enum class ReportLayout {
  kTrainTest,  // columns "Train", "Test"
  kModel,      // one "Model" column naming the structure mode
};

struct GridCell {
  Condition train;
  Condition test;
  std::string label;  // optional row label override
};

struct AblationGrid {
  std::string title = "ablation";
  ReportLayout layout = ReportLayout::kTrainTest;
  std::vector<GridCell> cells;
  TrainingConfig training;
  std::vector<int> ks{1, 5, 10, 20, 50};
  std::vector<uint64_t> seeds{13};

  /// Throws std::invalid_argument on an empty grid, bad ks, or a test
  /// condition whose structure mode differs from its training condition.
  void validate() const;
  nlohmann::json to_json() const;
  static AblationGrid from_json(const nlohmann::json& j);
  static AblationGrid load(const std::filesystem::path& path);

  /// Proper vs. row/column/both shuffling, trained on proper and on
  /// shuffle-both tables.
  static AblationGrid shuffle_grid();
  /// All four delimiter settings, trained with all delimiters and without.
  static AblationGrid delimiter_grid();
  /// none, aux_embeddings, hard_mask, soft_bias on proper tables.
  static AblationGrid structure_grid();
};

struct ReportRow {
  std::vector<std::string> labels;  // parallel to ReportTable::label_columns
  std::vector<double> accuracy;     // parallel to ReportTable::ks; empty on error
  std::string error;                // non-empty marks the row "ERR"

  bool failed() const { return !error.empty(); }
};

struct ReportTable {
  std::string title;
  std::vector<std::string> label_columns;
  std::vector<int> ks;
  std::vector<ReportRow> rows;

  nlohmann::json to_json() const;
  static ReportTable from_json(const nlohmann::json& j);
};

enum class ReportFormat { kMarkdown, kCsv, kJson };

std::string_view to_string(ReportFormat format);
ReportFormat parse_report_format(std::string_view name);

/// Accuracy values are fractions in [0,1] in csv/json and percentages in
/// markdown.
std::string render_report(const ReportTable& report, ReportFormat format);
void emit_report(const ReportTable& report, ReportFormat format, const std::filesystem::path& path);
/// Inverse of the csv rendering.
ReportTable parse_report_csv(std::string_view csv);

struct CellResult {
  GridCell cell;
  uint64_t seed = 0;
  std::optional<EvalReport> report;
  TrainResult training;
  std::string model_key;
  std::string error;
};

struct AblationResult {
  ReportTable table;
  std::vector<CellResult> cells;
};

struct AblationOptions {
  /// When set, trained models, reports and a manifest are written here.
  std::optional<std::filesystem::path> output_dir;
  std::function<void(const std::string&)> log;
};

/// Generates the data once, trains one model per (training condition, seed)
/// and evaluates every grid cell on the held-out questions. A cell whose
/// training diverges or throws is reported as an error row; the remaining
/// cells still run.
AblationResult run_ablation(const AblationGrid& grid, const SyntheticSpec& spec, const EncoderConfig& encoder,
                            const AblationOptions& options = {});

/// Seed-dependent stream for shuffling test tables.
uint64_t test_shuffle_seed(uint64_t seed);
/// Seed-dependent stream for shuffling training tables.
uint64_t train_shuffle_seed(uint64_t seed);

}  // namespace tabret
