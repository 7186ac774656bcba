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

#include "tabret/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace tabret {

namespace {

constexpr std::string_view kSpecialTokens[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "|", "."};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(PositionMode mode) {
  return mode == PositionMode::kSequential ? "sequential" : "cell_reset";
}

PositionMode parse_position_mode(std::string_view name) {
  if (name == "sequential") return PositionMode::kSequential;
  if (name == "cell_reset") return PositionMode::kCellReset;
  throw std::invalid_argument("unknown position mode '" + std::string(name) + "'");
}

Vocab::Vocab() {
  for (auto t : kSpecialTokens) add(t);
}

int Vocab::add(std::string_view token) {
  auto it = ids_.find(std::string(token));
  if (it != ids_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

int Vocab::id(std::string_view word) const {
  auto it = ids_.find(lower(word));
  return it == ids_.end() ? kUnk : it->second;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw DataError("write failure on " + path.string());
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.size() < kNumSpecials) throw DataError(path.string() + ": vocabulary is missing special tokens");
  for (int i = 0; i < kNumSpecials; ++i) {
    if (lines[static_cast<size_t>(i)] != kSpecialTokens[i]) {
      throw DataError(path.string() + ": line " + std::to_string(i + 1) + " must be " +
                      std::string(kSpecialTokens[i]));
    }
  }
  Vocab v;
  for (size_t i = kNumSpecials; i < lines.size(); ++i) {
    if (static_cast<size_t>(v.add(lines[i])) != i) {
      throw DataError(path.string() + ": duplicate token '" + lines[i] + "' on line " + std::to_string(i + 1));
    }
  }
  return v;
}

Vocab build_vocab(const Corpus& corpus, std::span<const Question> questions, int min_freq) {
  std::map<std::string, int> freq;
  auto count = [&](std::string_view text) {
    for (const auto& w : split_words(text)) ++freq[lower(w)];
  };
  for (const Table& t : corpus) {
    Table s = sanitize_table(t);
    count(s.title);
    for (const auto& h : s.header) count(h);
    for (const auto& r : s.rows)
      for (const auto& c : r) count(c);
  }
  for (const auto& q : questions) count(q.text);

  std::vector<std::pair<std::string, int>> entries;
  for (auto& [w, n] : freq) {
    bool special = std::find(std::begin(kSpecialTokens), std::end(kSpecialTokens), w) != std::end(kSpecialTokens);
    if (!special && n >= min_freq) entries.emplace_back(w, n);
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& e : entries) v.add(e.first);
  return v;
}

std::optional<double> parse_numeric(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  std::string_view s = trim(text);
  bool negative = false;
  auto take_sign = [&] {
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
      negative = s.front() == '-';
      s.remove_prefix(1);
      return true;
    }
    return false;
  };
  auto take_currency = [&] {
    static constexpr std::string_view kSymbols[] = {"$", "\xE2\x82\xAC", "\xC2\xA3", "\xC2\xA5"};  // $ € £ ¥
    for (auto sym : kSymbols) {
      if (s.starts_with(sym)) {
        s.remove_prefix(sym.size());
        return true;
      }
    }
    return false;
  };
  bool signed_first = take_sign();
  if (take_currency() && !signed_first) take_sign();

  std::string digits;
  bool seen_point = false;
  bool seen_digit = false;
  for (char c : s) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits += c;
      seen_digit = true;
    } else if (c == ',' && !seen_point) {
      continue;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
      digits += c;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_digit) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return negative ? -value : value;
}

RankGrid assign_ranks(const Table& table) {
  const size_t cols = table.num_cols();
  RankGrid grid(table.num_rows() + 1, std::vector<int>(cols, 0));
  for (size_t c = 0; c < cols; ++c) {
    std::vector<std::pair<double, size_t>> values;
    for (size_t r = 0; r < table.num_rows(); ++r) {
      if (auto v = parse_numeric(table.rows[r][c])) values.emplace_back(*v, r);
    }
    std::set<double> distinct;
    for (const auto& [v, r] : values) distinct.insert(v);
    for (const auto& [v, r] : values) {
      auto rank = std::distance(distinct.begin(), distinct.find(v)) + 1;
      grid[r + 1][c] = static_cast<int>(rank);
    }
  }
  return grid;
}

void TokenizedSequence::check() const {
  const size_t n = token_ids.size();
  if (segment_ids.size() != n || position_ids.size() != n || row_ids.size() != n || col_ids.size() != n ||
      rank_ids.size() != n) {
    throw std::logic_error("tokenized sequence channels have unequal lengths");
  }
}

namespace {

void push(TokenizedSequence& s, int token, int segment, int row, int col, int rank) {
  s.token_ids.push_back(token);
  s.segment_ids.push_back(segment);
  s.row_ids.push_back(row);
  s.col_ids.push_back(col);
  s.rank_ids.push_back(rank);
}

int token_for(const std::string& word, const Provenance& p, const Vocab& vocab) {
  if (!p.in_cell() && p.segment == 1) {
    if (word == kCellDelimiter) return Vocab::kCellDelim;
    if (word == kRowDelimiter) return Vocab::kRowDelim;
  }
  return vocab.id(word);
}

}  // namespace

TokenizedSequence encode(const LinearizedTable& linearized, const Vocab& vocab, PositionMode position_mode,
                         int max_len, const RankGrid* ranks) {
  if (max_len < 2) throw std::invalid_argument("max_len must be >= 2");
  TokenizedSequence s;
  const size_t body = std::min(linearized.size(), static_cast<size_t>(max_len - 2));
  s.token_ids.reserve(body + 2);
  push(s, Vocab::kCls, 0, 0, 0, 0);
  for (size_t i = 0; i < body; ++i) {
    const Provenance& p = linearized.provenance[i];
    int rank = 0;
    if (ranks && p.in_cell()) {
      const auto r = static_cast<size_t>(p.row - 1);
      const auto c = static_cast<size_t>(p.col - 1);
      if (r < ranks->size() && c < (*ranks)[r].size()) rank = (*ranks)[r][c];
    }
    push(s, token_for(linearized.words[i], p, vocab), p.segment, p.in_cell() ? p.row : 0, p.in_cell() ? p.col : 0,
         rank);
  }
  push(s, Vocab::kSep, 0, 0, 0, 0);

  s.position_ids.resize(s.size());
  if (position_mode == PositionMode::kSequential) {
    for (size_t i = 0; i < s.size(); ++i) s.position_ids[i] = static_cast<int>(i);
  } else {
    for (size_t i = 0; i < s.size(); ++i) {
      bool cell = s.row_ids[i] > 0 && s.col_ids[i] > 0;
      bool continues = cell && i > 0 && s.row_ids[i - 1] == s.row_ids[i] && s.col_ids[i - 1] == s.col_ids[i];
      s.position_ids[i] = continues ? s.position_ids[i - 1] + 1 : 0;
    }
  }
  return s;
}

TokenizedSequence encode_question(std::string_view text, const Vocab& vocab, int max_len) {
  LinearizedTable lin;
  for (auto& w : split_words(text)) {
    lin.words.push_back(std::move(w));
    lin.provenance.push_back({0, 0, 0});
  }
  return encode(lin, vocab, PositionMode::kSequential, max_len);
}

TokenizedSequence encode_table(const Table& table, const LinearizationOptions& options, const Vocab& vocab,
                               PositionMode position_mode, int max_len) {
  Table prepared = prepare_table(table, options);
  RankGrid ranks = assign_ranks(prepared);
  return encode(linearize(prepared, options), vocab, position_mode, max_len, &ranks);
}

std::vector<std::string> decode(std::span<const int> token_ids, const Vocab& vocab) {
  std::vector<std::string> words;
  for (int id : token_ids) {
    if (id == Vocab::kCls || id == Vocab::kSep || id == Vocab::kPad) continue;
    words.push_back(vocab.token(id));
  }
  return words;
}

}  // namespace tabret
