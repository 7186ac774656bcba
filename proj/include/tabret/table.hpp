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
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tabret {

/// Raised for malformed corpus/question files and invariant violations at
/// load time. The message carries the offending line number or id.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Row = std::vector<std::string>;

struct Table {
  std::string id;
  std::string title;
  Row header;
  std::vector<Row> rows;

  size_t num_cols() const { return header.size(); }
  size_t num_rows() const { return rows.size(); }

  /// Throws DataError when the header is empty or a row is ragged.
  void validate() const;

  bool operator==(const Table&) const = default;
};

struct Question {
  std::string id;
  std::string text;
  std::vector<std::string> answers;
  std::string positive_table_id;

  bool operator==(const Question&) const = default;
};

/// Id-keyed table collection. Insertion order is preserved and is the
/// canonical iteration order everywhere (indexing, evaluation, reports).
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Table> tables);

  /// Throws DataError on duplicate id or invalid table.
  void add(Table table);

  const Table* find(std::string_view id) const;
  const Table& at(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  size_t size() const { return tables_.size(); }
  bool empty() const { return tables_.empty(); }
  const std::vector<Table>& tables() const { return tables_; }
  const Table& operator[](size_t i) const { return tables_[i]; }

  auto begin() const { return tables_.begin(); }
  auto end() const { return tables_.end(); }

  bool operator==(const Corpus& other) const { return tables_ == other.tables_; }

 private:
  std::vector<Table> tables_;
  std::map<std::string, size_t, std::less<>> index_;
};

Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl);
std::string serialize_corpus(const Corpus& corpus);

std::vector<Question> load_questions(const std::filesystem::path& path, const Corpus& corpus);
void save_questions(std::span<const Question> questions, const std::filesystem::path& path);
std::vector<Question> parse_questions(std::string_view jsonl, const Corpus& corpus);
std::string serialize_questions(std::span<const Question> questions);

/// Lowercase, collapse whitespace runs to one space, trim.
std::string normalize_text(std::string_view text);

/// Normalized title + header + cells, space separated.
std::string serialize_for_matching(const Table& table);

/// True iff some normalized answer is a substring of the normalized table text.
bool contains_answer(const Table& table, std::span<const std::string> answers);

}  // namespace tabret
