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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tabret/linearizer.hpp"
#include "tabret/table.hpp"

namespace tabret {

enum class PositionMode { kSequential, kCellReset };

std::string_view to_string(PositionMode mode);
PositionMode parse_position_mode(std::string_view name);

/// Word-level vocabulary. Ids are dense from 0; the six special tokens come
/// first in a fixed order.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kCellDelim = 4;
  static constexpr int kRowDelim = 5;
  static constexpr int kNumSpecials = 6;

  Vocab();

  /// Appends a token if absent; returns its id.
  int add(std::string_view token);

  int id(std::string_view word) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<size_t>(id)); }
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Lowercased words of every title, header, cell and question, kept when
/// their frequency is >= min_freq, ordered by (frequency desc, word asc).
Vocab build_vocab(const Corpus& corpus, std::span<const Question> questions, int min_freq = 1);

/// Per-cell numeric ranks; grid[0] is the header row (always 0), grid[r] is
/// content row r. Indexed so that grid[row_id - 1][col_id - 1] matches
/// Provenance coordinates.
using RankGrid = std::vector<std::vector<int>>;

/// Accepts optional sign, leading currency symbol, digits with grouping
/// commas and at most one decimal point.
std::optional<double> parse_numeric(std::string_view text);

RankGrid assign_ranks(const Table& table);

struct TokenizedSequence {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  std::vector<int> position_ids;
  std::vector<int> row_ids;
  std::vector<int> col_ids;
  std::vector<int> rank_ids;

  size_t size() const { return token_ids.size(); }
  /// Throws std::logic_error when channel lengths disagree.
  void check() const;
};

TokenizedSequence encode(const LinearizedTable& linearized, const Vocab& vocab, PositionMode position_mode,
                         int max_len, const RankGrid* ranks = nullptr);

/// Text encoding: segment, row, column and rank all 0, sequential positions.
TokenizedSequence encode_question(std::string_view text, const Vocab& vocab, int max_len);

/// Truncates, shuffles, ranks and encodes one table.
TokenizedSequence encode_table(const Table& table, const LinearizationOptions& options, const Vocab& vocab,
                               PositionMode position_mode, int max_len);

/// Tokens between CLS and SEP.
std::vector<std::string> decode(std::span<const int> token_ids, const Vocab& vocab);

}  // namespace tabret
