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
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "tabret/rng.hpp"
#include "tabret/table.hpp"

namespace tabret::testing {

inline Table mlb_table() {
  Table t;
  t.id = "mlb";
  t.title = "MLB pay";
  t.header = {"Name", "Salary"};
  t.rows = {{"Trout", "$37M"}};
  return t;
}

inline std::string random_word(Rng& rng) {
  static const std::string kLetters = "abcdefghijklmnopqrstuvwxyz0123456789$,";
  std::uniform_int_distribution<size_t> len(1, 6), pick(0, kLetters.size() - 1);
  std::string w;
  for (size_t i = 0, n = len(rng); i < n; ++i) w += kLetters[pick(rng)];
  return w;
}

inline std::string random_field(Rng& rng, size_t max_words) {
  std::uniform_int_distribution<size_t> words(1, max_words);
  std::string s;
  for (size_t i = 0, n = words(rng); i < n; ++i) {
    if (i) s += ' ';
    s += random_word(rng);
  }
  return s;
}

/// Word-normalized table: fields are single-space-joined words that are
/// never "|" or ".".
inline Table random_table(Rng& rng, const std::string& id, size_t max_rows = 6, size_t max_cols = 5) {
  std::uniform_int_distribution<size_t> rows(0, max_rows), cols(1, max_cols);
  Table t;
  t.id = id;
  t.title = random_field(rng, 4);
  const size_t c = cols(rng);
  for (size_t j = 0; j < c; ++j) t.header.push_back(random_field(rng, 2));
  for (size_t i = 0, n = rows(rng); i < n; ++i) {
    Row r;
    for (size_t j = 0; j < c; ++j) r.push_back(random_field(rng, 3));
    t.rows.push_back(std::move(r));
  }
  return t;
}

/// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tabret-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace tabret::testing
