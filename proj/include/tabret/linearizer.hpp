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
#include <string>
#include <string_view>
#include <vector>

#include "tabret/table.hpp"

namespace tabret {

inline constexpr std::string_view kCellDelimiter = "|";
inline constexpr std::string_view kRowDelimiter = ".";

enum class ShuffleMode { kNone, kRow, kColumn, kBoth };
enum class DelimiterMode { kAll, kCell, kRow, kNone };

std::string_view to_string(ShuffleMode mode);
std::string_view to_string(DelimiterMode mode);
ShuffleMode parse_shuffle_mode(std::string_view name);
DelimiterMode parse_delimiter_mode(std::string_view name);

struct LinearizationOptions {
  bool cell_delimiter_on = true;
  bool row_delimiter_on = true;
  ShuffleMode shuffle_mode = ShuffleMode::kNone;
  uint64_t shuffle_seed = 0;
  int word_budget = 100;
  // Whether the header row takes part in in-row shuffles.
  bool shuffle_header = true;

  DelimiterMode delimiters() const;
  void set_delimiters(DelimiterMode mode);
  void validate() const;
};

/// Structural origin of one word. row/col are 1-indexed inside the table
/// (header is row 1, first content row is row 2) and 0 outside any cell.
struct Provenance {
  int segment = 0;
  int row = 0;
  int col = 0;

  bool in_cell() const { return row > 0 && col > 0; }
  bool operator==(const Provenance&) const = default;
};

struct LinearizedTable {
  std::vector<std::string> words;
  std::vector<Provenance> provenance;

  size_t size() const { return words.size(); }
};

/// Maximal whitespace-separated units.
std::vector<std::string> split_words(std::string_view text);

/// Word-normalizes every field and replaces standalone "|" and "." words with
/// "/" and ";" so delimiters stay unambiguous.
Table sanitize_table(const Table& table);

/// Word count of the fully delimited linearization.
size_t linearized_word_count(const Table& table);

Table select_rows_within_budget(const Table& table, int word_budget);

LinearizedTable linearize(const Table& table, const LinearizationOptions& options);

Table shuffle_table(const Table& table, ShuffleMode mode, uint64_t seed, bool shuffle_header = true);

/// Budget truncation followed by shuffling (when requested). The shuffle
/// stream is derived from the options seed and the table id.
Table prepare_table(const Table& table, const LinearizationOptions& options);

/// linearize(prepare_table(table, options), options).
LinearizedTable prepare_and_linearize(const Table& table, const LinearizationOptions& options);

/// Inverse of linearize for fully delimited, untruncated output. The
/// returned table has an empty id. Throws DataError on malformed input.
Table parse_linearized(std::span<const std::string> words);

}  // namespace tabret
