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

#include "tabret/table.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tabret {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw DataError("read failure on " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("write failure on " + path.string());
}

// Calls fn(line_number, line) for each non-blank line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  size_t lineno = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    bool blank = line.find_first_not_of(" \t") == std::string_view::npos;
    if (!blank) fn(lineno, line);
    if (nl == text.size()) break;
    pos = nl + 1;
  }
}

std::string at_line(size_t lineno, const std::string& what) {
  return "line " + std::to_string(lineno) + ": " + what;
}

const json& require(const json& obj, const char* key, size_t lineno) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(at_line(lineno, std::string("missing field '") + key + "'"));
  return *it;
}

std::string require_string(const json& obj, const char* key, size_t lineno) {
  const json& v = require(obj, key, lineno);
  if (!v.is_string()) throw DataError(at_line(lineno, std::string("field '") + key + "' must be a string"));
  return v.get<std::string>();
}

std::vector<std::string> require_string_array(const json& v, const std::string& what, size_t lineno) {
  if (!v.is_array()) throw DataError(at_line(lineno, what + " must be an array of strings"));
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_string()) throw DataError(at_line(lineno, what + " must be an array of strings"));
    out.push_back(e.get<std::string>());
  }
  return out;
}

json parse_line(std::string_view line, size_t lineno) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(at_line(lineno, std::string("parse error: ") + e.what()));
  }
  if (!obj.is_object()) throw DataError(at_line(lineno, "record must be a JSON object"));
  return obj;
}

}  // namespace

void Table::validate() const {
  if (id.empty()) throw DataError("table with empty id");
  if (header.empty()) throw DataError("table '" + id + "' has an empty header");
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      throw DataError("table '" + id + "' row " + std::to_string(r + 1) + " has " +
                      std::to_string(rows[r].size()) + " cells, header has " +
                      std::to_string(header.size()) + " (ragged rows)");
    }
  }
}

Corpus::Corpus(std::vector<Table> tables) {
  tables_.reserve(tables.size());
  for (auto& t : tables) add(std::move(t));
}

void Corpus::add(Table table) {
  table.validate();
  if (index_.contains(table.id)) throw DataError("duplicate table id '" + table.id + "'");
  index_.emplace(table.id, tables_.size());
  tables_.push_back(std::move(table));
}

const Table* Corpus::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &tables_[it->second];
}

const Table& Corpus::at(std::string_view id) const {
  const Table* t = find(id);
  if (!t) throw DataError("unknown table id '" + std::string(id) + "'");
  return *t;
}

Corpus parse_corpus(std::string_view jsonl) {
  Corpus corpus;
  for_each_line(jsonl, [&](size_t lineno, std::string_view line) {
    json obj = parse_line(line, lineno);
    Table t;
    t.id = require_string(obj, "id", lineno);
    t.title = require_string(obj, "title", lineno);
    t.header = require_string_array(require(obj, "header", lineno), "header", lineno);
    const json& rows = require(obj, "rows", lineno);
    if (!rows.is_array()) throw DataError(at_line(lineno, "rows must be an array"));
    for (const auto& r : rows) t.rows.push_back(require_string_array(r, "row", lineno));
    try {
      corpus.add(std::move(t));
    } catch (const DataError& e) {
      throw DataError(at_line(lineno, e.what()));
    }
  });
  return corpus;
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const Table& t : corpus) {
    json obj = {{"id", t.id}, {"title", t.title}, {"header", t.header}, {"rows", t.rows}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, serialize_corpus(corpus));
}

std::vector<Question> parse_questions(std::string_view jsonl, const Corpus& corpus) {
  std::vector<Question> out;
  for_each_line(jsonl, [&](size_t lineno, std::string_view line) {
    json obj = parse_line(line, lineno);
    Question q;
    q.id = require_string(obj, "id", lineno);
    q.text = require_string(obj, "text", lineno);
    q.answers = require_string_array(require(obj, "answers", lineno), "answers", lineno);
    q.positive_table_id = require_string(obj, "positive_table_id", lineno);
    if (q.answers.empty()) throw DataError(at_line(lineno, "question '" + q.id + "' has no answers"));
    const Table* t = corpus.find(q.positive_table_id);
    if (!t) {
      throw DataError(at_line(lineno, "question '" + q.id + "' references missing table '" +
                                          q.positive_table_id + "' (dangling positive_table_id)"));
    }
    if (!contains_answer(*t, q.answers)) {
      throw DataError(at_line(lineno, "positive table '" + q.positive_table_id + "' of question '" + q.id +
                                          "' contains none of its answers"));
    }
    out.push_back(std::move(q));
  });
  return out;
}

std::string serialize_questions(std::span<const Question> questions) {
  std::string out;
  for (const Question& q : questions) {
    json obj = {{"id", q.id}, {"text", q.text}, {"answers", q.answers}, {"positive_table_id", q.positive_table_id}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<Question> load_questions(const std::filesystem::path& path, const Corpus& corpus) {
  return parse_questions(read_file(path), corpus);
}

void save_questions(std::span<const Question> questions, const std::filesystem::path& path) {
  write_file(path, serialize_questions(questions));
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(uc));
  }
  return out;
}

std::string serialize_for_matching(const Table& table) {
  std::string raw = table.title;
  for (const auto& h : table.header) {
    raw += ' ';
    raw += h;
  }
  for (const auto& row : table.rows) {
    for (const auto& cell : row) {
      raw += ' ';
      raw += cell;
    }
  }
  return normalize_text(raw);
}

bool contains_answer(const Table& table, std::span<const std::string> answers) {
  if (answers.empty()) return false;
  const std::string hay = serialize_for_matching(table);
  for (const auto& a : answers) {
    std::string needle = normalize_text(a);
    if (needle.empty()) continue;
    if (hay.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace tabret
