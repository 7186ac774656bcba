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

#include "tabret/linearizer.hpp"

#include <algorithm>
#include <cctype>

#include "tabret/rng.hpp"

namespace tabret {

std::string_view to_string(ShuffleMode mode) {
  switch (mode) {
    case ShuffleMode::kNone: return "none";
    case ShuffleMode::kRow: return "row";
    case ShuffleMode::kColumn: return "column";
    case ShuffleMode::kBoth: return "both";
  }
  return "none";
}

std::string_view to_string(DelimiterMode mode) {
  switch (mode) {
    case DelimiterMode::kAll: return "all";
    case DelimiterMode::kCell: return "cell";
    case DelimiterMode::kRow: return "row";
    case DelimiterMode::kNone: return "none";
  }
  return "all";
}

ShuffleMode parse_shuffle_mode(std::string_view name) {
  if (name == "none") return ShuffleMode::kNone;
  if (name == "row") return ShuffleMode::kRow;
  if (name == "column") return ShuffleMode::kColumn;
  if (name == "both") return ShuffleMode::kBoth;
  throw std::invalid_argument("unknown shuffle mode '" + std::string(name) + "'");
}

DelimiterMode parse_delimiter_mode(std::string_view name) {
  if (name == "all") return DelimiterMode::kAll;
  if (name == "cell") return DelimiterMode::kCell;
  if (name == "row") return DelimiterMode::kRow;
  if (name == "none") return DelimiterMode::kNone;
  throw std::invalid_argument("unknown delimiter mode '" + std::string(name) + "'");
}

DelimiterMode LinearizationOptions::delimiters() const {
  if (cell_delimiter_on && row_delimiter_on) return DelimiterMode::kAll;
  if (cell_delimiter_on) return DelimiterMode::kCell;
  if (row_delimiter_on) return DelimiterMode::kRow;
  return DelimiterMode::kNone;
}

void LinearizationOptions::set_delimiters(DelimiterMode mode) {
  cell_delimiter_on = mode == DelimiterMode::kAll || mode == DelimiterMode::kCell;
  row_delimiter_on = mode == DelimiterMode::kAll || mode == DelimiterMode::kRow;
}

void LinearizationOptions::validate() const {
  if (word_budget < 1) throw std::invalid_argument("word_budget must be >= 1");
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

namespace {

std::string sanitize_field(std::string_view text) {
  std::string out;
  for (auto& w : split_words(text)) {
    if (w == kCellDelimiter) w = "/";
    if (w == kRowDelimiter) w = ";";
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

size_t count_words(std::string_view text) { return split_words(text).size(); }

// Delimited words contributed by one row (header or content), excluding the
// leading row delimiter.
size_t row_word_count(const Row& row) {
  size_t n = row.empty() ? 0 : row.size() - 1;
  for (const auto& cell : row) n += count_words(cell);
  return n;
}

struct Emitter {
  LinearizedTable& out;

  void word(std::string w, Provenance p) {
    out.words.push_back(std::move(w));
    out.provenance.push_back(p);
  }
  void text(std::string_view s, Provenance p) {
    for (auto& w : split_words(s)) {
      if (w == kCellDelimiter) w = "/";
      if (w == kRowDelimiter) w = ";";
      word(std::move(w), p);
    }
  }
};

void emit_row(Emitter& e, const Row& row, int row_index, bool cell_delims) {
  for (size_t c = 0; c < row.size(); ++c) {
    if (c > 0 && cell_delims) e.word(std::string(kCellDelimiter), {1, 0, 0});
    e.text(row[c], {1, row_index, static_cast<int>(c) + 1});
  }
}

template <typename T>
void permute(std::vector<T*>& slots, Rng rng) {
  std::vector<T> values;
  values.reserve(slots.size());
  for (T* s : slots) values.push_back(*s);
  std::shuffle(values.begin(), values.end(), rng);
  for (size_t i = 0; i < slots.size(); ++i) *slots[i] = std::move(values[i]);
}

}  // namespace

Table sanitize_table(const Table& table) {
  Table out;
  out.id = table.id;
  out.title = sanitize_field(table.title);
  for (const auto& h : table.header) out.header.push_back(sanitize_field(h));
  for (const auto& r : table.rows) {
    Row row;
    for (const auto& c : r) row.push_back(sanitize_field(c));
    out.rows.push_back(std::move(row));
  }
  return out;
}

size_t linearized_word_count(const Table& table) {
  size_t n = count_words(table.title) + 1 + row_word_count(table.header);
  for (const auto& r : table.rows) n += 1 + row_word_count(r);
  return n;
}

Table select_rows_within_budget(const Table& table, int word_budget) {
  Table out;
  out.id = table.id;
  out.title = table.title;
  out.header = table.header;
  size_t used = count_words(table.title) + 1 + row_word_count(table.header);
  const auto budget = static_cast<size_t>(std::max(word_budget, 0));
  for (const auto& r : table.rows) {
    size_t next = used + 1 + row_word_count(r);
    if (next > budget) break;
    used = next;
    out.rows.push_back(r);
  }
  return out;
}

LinearizedTable linearize(const Table& table, const LinearizationOptions& options) {
  LinearizedTable out;
  Emitter e{out};
  e.text(table.title, {0, 0, 0});
  if (options.row_delimiter_on) e.word(std::string(kRowDelimiter), {1, 0, 0});
  emit_row(e, table.header, 1, options.cell_delimiter_on);
  for (size_t r = 0; r < table.rows.size(); ++r) {
    if (options.row_delimiter_on) e.word(std::string(kRowDelimiter), {1, 0, 0});
    emit_row(e, table.rows[r], static_cast<int>(r) + 2, options.cell_delimiter_on);
  }
  return out;
}

Table shuffle_table(const Table& table, ShuffleMode mode, uint64_t seed, bool shuffle_header) {
  Table out = table;
  if (mode == ShuffleMode::kRow || mode == ShuffleMode::kBoth) {
    // Row 0 is the header; content rows follow.
    auto shuffle_row = [&](Row& row, uint64_t index) {
      std::vector<std::string*> slots;
      for (auto& c : row) slots.push_back(&c);
      permute(slots, make_rng(seed, "row", index));
    };
    if (shuffle_header) shuffle_row(out.header, 0);
    for (size_t r = 0; r < out.rows.size(); ++r) shuffle_row(out.rows[r], r + 1);
  }
  if (mode == ShuffleMode::kColumn || mode == ShuffleMode::kBoth) {
    for (size_t c = 0; c < out.num_cols(); ++c) {
      std::vector<std::string*> slots;
      for (auto& row : out.rows) slots.push_back(&row[c]);
      permute(slots, make_rng(seed, "column", c));
    }
  }
  return out;
}

Table prepare_table(const Table& table, const LinearizationOptions& options) {
  options.validate();
  Table t = select_rows_within_budget(table, options.word_budget);
  if (options.shuffle_mode != ShuffleMode::kNone) {
    uint64_t seed = derive_seed(options.shuffle_seed, table.id);
    t = shuffle_table(t, options.shuffle_mode, seed, options.shuffle_header);
  }
  return t;
}

LinearizedTable prepare_and_linearize(const Table& table, const LinearizationOptions& options) {
  return linearize(prepare_table(table, options), options);
}

Table parse_linearized(std::span<const std::string> words) {
  std::vector<std::vector<std::string>> segments(1);
  for (const auto& w : words) {
    if (w == kRowDelimiter) {
      segments.emplace_back();
    } else {
      segments.back().push_back(w);
    }
  }
  if (segments.size() < 2) throw DataError("linearized sequence has no header delimiter");

  auto join = [](auto first, auto last) {
    std::string s;
    for (auto it = first; it != last; ++it) {
      if (!s.empty()) s += ' ';
      s += *it;
    }
    return s;
  };
  auto split_cells = [&](const std::vector<std::string>& seg) {
    Row row;
    auto start = seg.begin();
    for (auto it = seg.begin(); it != seg.end(); ++it) {
      if (*it == kCellDelimiter) {
        row.push_back(join(start, it));
        start = it + 1;
      }
    }
    row.push_back(join(start, seg.end()));
    return row;
  };

  Table t;
  t.title = join(segments[0].begin(), segments[0].end());
  t.header = split_cells(segments[1]);
  for (size_t s = 2; s < segments.size(); ++s) {
    Row row = split_cells(segments[s]);
    if (row.size() != t.header.size()) {
      throw DataError("linearized row " + std::to_string(s - 1) + " has " + std::to_string(row.size()) +
                      " cells, header has " + std::to_string(t.header.size()) + " (ragged rows)");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace tabret
