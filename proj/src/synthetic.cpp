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

#include "tabret/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string_view>
#include <unordered_set>

#include "tabret/rng.hpp"

namespace tabret {

using nlohmann::json;

namespace {

constexpr std::string_view kCategories[] = {
    "cities",  "rivers",   "lakes",     "mountains", "islands", "bridges", "airports",  "stadiums", "castles",
    "museums", "colleges", "films",     "novels",    "albums",  "ships",   "players",   "painters", "companies",
};

constexpr std::string_view kNumericAttributes[] = {
    "population", "area",    "elevation", "length",   "height",   "width",    "depth",     "capacity",
    "attendance", "revenue", "budget",    "founded",  "opened",   "tonnage",  "sales",     "salary",
    "visitors",   "staff",   "weight",    "distance", "enrolment", "runtime", "circulation", "volume",
};

constexpr std::string_view kCategoricalAttributes[] = {
    "country", "region",   "province", "district", "owner",  "architect", "designer", "director",
    "author",  "publisher", "label",   "genre",    "language", "style",   "operator", "builder",
    "club",    "position", "league",   "material", "founder", "sponsor",  "status",   "county",
};

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

constexpr int kAttributesPerCategory = 8;
constexpr int kValuesPerAttribute = 96;

struct Attribute {
  std::string name;
  bool numeric = false;
};

// Six-letter consonant-vowel words. Fixed-length words cannot contain one
// another, and candidates occurring inside a template word are rejected, so
// a pseudo-word matches only itself under substring search.
class PseudoWords {
 public:
  explicit PseudoWords(uint64_t seed) : rng_(make_rng(seed, "pseudo-words")) {
    for (auto w : kCategories) fixed_ += std::string(w) + ' ';
    for (auto w : kNumericAttributes) fixed_ += std::string(w) + ' ';
    for (auto w : kCategoricalAttributes) fixed_ += std::string(w) + ' ';
    fixed_ += "list of by name what is the";
  }

  static size_t capacity() {
    const size_t s = kConsonants.size() * kVowels.size();
    return s * s * s;
  }

  std::string next() {
    if (used_.size() >= capacity() / 2) throw InfeasibleSpec("pseudo-word space exhausted");
    for (;;) {
      std::string w;
      for (int i = 0; i < 3; ++i) {
        w += kConsonants[pick(kConsonants.size())];
        w += kVowels[pick(kVowels.size())];
      }
      if (fixed_.find(w) != std::string::npos) continue;
      if (used_.insert(w).second) return w;
    }
  }

 private:
  size_t pick(size_t n) { return std::uniform_int_distribution<size_t>(0, n - 1)(rng_); }

  Rng rng_;
  std::string fixed_;
  std::unordered_set<std::string> used_;
};

size_t uniform(Rng& rng, size_t lo, size_t hi) { return std::uniform_int_distribution<size_t>(lo, hi)(rng); }

template <typename T>
std::vector<T> sample(std::vector<T> pool, size_t n, Rng& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(n, pool.size()));
  return pool;
}

std::string format_number(int value) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d,%03d", value / 1000, value % 1000);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw std::invalid_argument(std::string("synthetic spec: ") + what + " must be positive");
  };
  positive(table_count, "table_count");
  positive(min_rows, "min_rows");
  positive(min_cols, "min_cols");
  positive(entity_vocab_size, "entity_vocab_size");
  positive(attribute_vocab_size, "attribute_vocab_size");
  positive(questions_per_table, "questions_per_table");
  if (min_cols < 2) throw std::invalid_argument("synthetic spec: min_cols must be >= 2");
  if (max_rows < min_rows) throw std::invalid_argument("synthetic spec: max_rows < min_rows");
  if (max_cols < min_cols) throw std::invalid_argument("synthetic spec: max_cols < min_cols");
  if (!(numeric_column_fraction >= 0 && numeric_column_fraction <= 1)) {
    throw std::invalid_argument("synthetic spec: numeric_column_fraction outside [0,1]");
  }
  if (!(test_fraction >= 0 && test_fraction <= 1)) {
    throw std::invalid_argument("synthetic spec: test_fraction outside [0,1]");
  }
}

json SyntheticSpec::to_json() const {
  return {{"table_count", table_count},
          {"min_rows", min_rows},
          {"max_rows", max_rows},
          {"min_cols", min_cols},
          {"max_cols", max_cols},
          {"entity_vocab_size", entity_vocab_size},
          {"attribute_vocab_size", attribute_vocab_size},
          {"questions_per_table", questions_per_table},
          {"numeric_column_fraction", numeric_column_fraction},
          {"test_fraction", test_fraction},
          {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  s.table_count = j.value("table_count", s.table_count);
  s.min_rows = j.value("min_rows", s.min_rows);
  s.max_rows = j.value("max_rows", s.max_rows);
  s.min_cols = j.value("min_cols", s.min_cols);
  s.max_cols = j.value("max_cols", s.max_cols);
  s.entity_vocab_size = j.value("entity_vocab_size", s.entity_vocab_size);
  s.attribute_vocab_size = j.value("attribute_vocab_size", s.attribute_vocab_size);
  s.questions_per_table = j.value("questions_per_table", s.questions_per_table);
  s.numeric_column_fraction = j.value("numeric_column_fraction", s.numeric_column_fraction);
  s.test_fraction = j.value("test_fraction", s.test_fraction);
  s.seed = j.value("seed", s.seed);
  return s;
}

std::string SyntheticSpec::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_tag(to_json().dump())));
  return buf;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const size_t entities_needed = static_cast<size_t>(spec.table_count) * static_cast<size_t>(spec.max_rows);
  if (static_cast<size_t>(spec.entity_vocab_size) > PseudoWords::capacity() / 4) {
    throw InfeasibleSpec("entity_vocab_size exceeds the pseudo-word space");
  }
  const size_t attribute_pool = std::size(kNumericAttributes) + std::size(kCategoricalAttributes);
  if (static_cast<size_t>(spec.attribute_vocab_size) > attribute_pool) {
    throw InfeasibleSpec("attribute_vocab_size exceeds the " + std::to_string(attribute_pool) + " attribute names");
  }
  if (spec.max_cols - 1 > kAttributesPerCategory) {
    throw InfeasibleSpec("max_cols exceeds " + std::to_string(kAttributesPerCategory + 1));
  }
  if (spec.questions_per_table > spec.min_rows * (spec.min_cols - 1)) {
    throw InfeasibleSpec("questions_per_table exceeds the cells of the smallest table");
  }

  PseudoWords words(spec.seed);
  Rng rng = make_rng(spec.seed, "layout");

  // Attribute vocabulary: alternate numeric and categorical names so both
  // kinds are present for any size >= 2.
  std::vector<Attribute> vocabulary;
  {
    std::vector<std::string_view> num(std::begin(kNumericAttributes), std::end(kNumericAttributes));
    std::vector<std::string_view> cat(std::begin(kCategoricalAttributes), std::end(kCategoricalAttributes));
    std::shuffle(num.begin(), num.end(), rng);
    std::shuffle(cat.begin(), cat.end(), rng);
    for (size_t i = 0; vocabulary.size() < static_cast<size_t>(spec.attribute_vocab_size); ++i) {
      if (i < num.size()) vocabulary.push_back({std::string(num[i]), true});
      if (i < cat.size() && vocabulary.size() < static_cast<size_t>(spec.attribute_vocab_size)) {
        vocabulary.push_back({std::string(cat[i]), false});
      }
    }
  }
  std::vector<Attribute> numeric_vocab, categorical_vocab;
  for (const auto& a : vocabulary) (a.numeric ? numeric_vocab : categorical_vocab).push_back(a);

  // Each category draws a fixed attribute set, shared by all its tables.
  struct Category {
    std::string name;
    std::vector<Attribute> numeric, categorical;
  };
  std::vector<Category> categories;
  for (auto name : kCategories) {
    Category c{std::string(name), {}, {}};
    const size_t half = kAttributesPerCategory / 2;
    c.numeric = sample(numeric_vocab, half, rng);
    c.categorical = sample(categorical_vocab, kAttributesPerCategory - c.numeric.size(), rng);
    if (c.categorical.size() < kAttributesPerCategory - half) {
      auto more = sample(numeric_vocab, kAttributesPerCategory, rng);
      for (const auto& a : more) {
        if (c.numeric.size() + c.categorical.size() >= kAttributesPerCategory) break;
        if (std::none_of(c.numeric.begin(), c.numeric.end(), [&](const Attribute& x) { return x.name == a.name; })) {
          c.numeric.push_back(a);
        }
      }
    }
    categories.push_back(std::move(c));
  }

  // Entity names: drawn without replacement from a vocabulary of
  // entity_vocab_size pseudo-words.
  std::vector<std::string> entity_pool;
  for (int i = 0; i < spec.entity_vocab_size; ++i) entity_pool.push_back(words.next());
  std::map<std::string, std::vector<std::string>> value_pools;
  for (const auto& a : categorical_vocab) {
    auto& pool = value_pools[a.name];
    for (int i = 0; i < kValuesPerAttribute; ++i) pool.push_back(words.next());
  }
  std::shuffle(entity_pool.begin(), entity_pool.end(), rng);
  size_t next_entity = 0;

  std::unordered_set<int> used_numbers;
  auto fresh_number = [&] {
    std::uniform_int_distribution<int> dist(100000, 999999);
    for (;;) {
      int v = dist(rng);
      if (used_numbers.insert(v).second) return format_number(v);
    }
  };

  const int width = spec.table_count >= 1000 ? 5 : 4;
  auto make_id = [&](char prefix, size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
    return std::string(buf);
  };

  SyntheticData data;
  std::vector<std::vector<bool>> numeric_cols;
  for (int t = 0; t < spec.table_count; ++t) {
    const Category& cat = categories[uniform(rng, 0, categories.size() - 1)];
    const size_t rows = uniform(rng, spec.min_rows, spec.max_rows);
    const size_t cols = uniform(rng, spec.min_cols, spec.max_cols);
    if (next_entity + rows > entity_pool.size()) {
      throw InfeasibleSpec("entity vocabulary of " + std::to_string(spec.entity_vocab_size) +
                           " names is too small for " + std::to_string(entities_needed) + " potential rows");
    }
    // Column kinds: Bernoulli(numeric_column_fraction), at least one numeric.
    const size_t attrs = cols - 1;
    std::vector<bool> kind(attrs);
    std::bernoulli_distribution coin(spec.numeric_column_fraction);
    size_t n_numeric = 0;
    for (size_t c = 0; c < attrs; ++c) n_numeric += (kind[c] = coin(rng));
    if (n_numeric == 0) kind[uniform(rng, 0, attrs - 1)] = true;
    n_numeric = static_cast<size_t>(std::count(kind.begin(), kind.end(), true));
    if (n_numeric > cat.numeric.size()) {
      n_numeric = cat.numeric.size();
      for (size_t c = 0, seen = 0; c < attrs; ++c) kind[c] = kind[c] && seen++ < n_numeric;
    }
    if (attrs - n_numeric > cat.categorical.size()) {
      for (size_t c = 0; c < attrs; ++c) kind[c] = true;
      if (attrs > cat.numeric.size()) throw InfeasibleSpec("category has too few attributes");
    }
    auto num = sample(cat.numeric, cat.numeric.size(), rng);
    auto catg = sample(cat.categorical, cat.categorical.size(), rng);
    std::vector<Attribute> chosen;
    for (size_t c = 0, ni = 0, ci = 0; c < attrs; ++c) chosen.push_back(kind[c] ? num[ni++] : catg[ci++]);

    Table table;
    table.id = make_id('t', static_cast<size_t>(t));
    table.title = "list of " + cat.name + " by " + chosen[uniform(rng, 0, attrs - 1)].name;
    table.header.push_back("name");
    for (const auto& a : chosen) table.header.push_back(a.name);
    for (size_t r = 0; r < rows; ++r) {
      Row row{entity_pool[next_entity++]};
      for (const auto& a : chosen) {
        if (a.numeric) {
          row.push_back(fresh_number());
        } else {
          const auto& pool = value_pools.at(a.name);
          row.push_back(pool[uniform(rng, 0, pool.size() - 1)]);
        }
      }
      table.rows.push_back(std::move(row));
    }
    numeric_cols.push_back(std::vector<bool>{false});
    numeric_cols.back().insert(numeric_cols.back().end(), kind.begin(), kind.end());
    data.corpus.add(std::move(table));
  }

  // Questions about cells whose value occurs in exactly one table. A
  // table's questions concentrate on as few entities as its unique cells
  // allow, so the split below can hold out questions about entities that
  // other questions still cover.
  std::vector<std::string> serialized;
  for (const Table& t : data.corpus) serialized.push_back(serialize_for_matching(t));
  auto occurrences = [&](const std::string& answer) {
    const std::string needle = normalize_text(answer);
    size_t n = 0;
    for (const auto& s : serialized) n += s.find(needle) != std::string::npos;
    return n;
  };

  std::vector<Question> questions;
  std::vector<size_t> entity_of;  // question -> global entity index
  size_t entity_base = 0;
  const auto quota = static_cast<size_t>(spec.questions_per_table);
  for (size_t t = 0; t < data.corpus.size(); ++t) {
    const Table& table = data.corpus[t];
    std::vector<size_t> rows(table.rows.size());
    for (size_t r = 0; r < rows.size(); ++r) rows[r] = r;
    std::shuffle(rows.begin(), rows.end(), rng);
    size_t asked = 0;
    for (size_t r : rows) {
      std::vector<size_t> cols;
      for (size_t c = 1; c < table.header.size(); ++c) cols.push_back(c);
      std::shuffle(cols.begin(), cols.end(), rng);
      for (size_t c : cols) {
        if (asked == quota) break;
        if (!numeric_cols[t][c] && occurrences(table.rows[r][c]) != 1) continue;
        Question q;
        q.id = make_id('q', questions.size());
        q.text = "what is the " + table.header[c] + " of " + table.rows[r][0];
        q.answers = {table.rows[r][c]};
        q.positive_table_id = table.id;
        questions.push_back(std::move(q));
        entity_of.push_back(entity_base + r);
        ++asked;
      }
    }
    if (asked < quota) throw InfeasibleSpec("table " + table.id + " has too few corpus-unique cells for its questions");
    entity_base += table.rows.size();
  }

  // Hold out test_fraction of the questions. A question is held out only
  // while its entity keeps a training question; the remainder, if any, is
  // filled without that constraint.
  std::vector<size_t> order(questions.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = make_rng(spec.seed, "split");
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_test = static_cast<size_t>(std::llround(spec.test_fraction * static_cast<double>(questions.size())));
  std::map<size_t, size_t> in_train;
  for (size_t e : entity_of) ++in_train[e];
  std::vector<bool> is_test(questions.size(), false);
  size_t held = 0;
  for (size_t i : order) {
    if (held == n_test) break;
    if (in_train[entity_of[i]] < 2) continue;
    --in_train[entity_of[i]];
    is_test[i] = true;
    ++held;
  }
  for (size_t i : order) {
    if (held == n_test) break;
    if (is_test[i]) continue;
    is_test[i] = true;
    ++held;
  }
  for (size_t i = 0; i < questions.size(); ++i) (is_test[i] ? data.test : data.train).push_back(questions[i]);
  return data;
}

}  // namespace tabret
