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

#include "tabret/experiments.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "tabret/rng.hpp"

namespace tabret {

using nlohmann::json;

namespace {

std::string hex_hash(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_tag(text)));
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("write failure on " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

uint64_t test_shuffle_seed(uint64_t seed) { return derive_seed(seed, "test-shuffle"); }
uint64_t train_shuffle_seed(uint64_t seed) { return derive_seed(seed, "train-shuffle"); }

// ---- conditions and grids -------------------------------------------------------

LinearizationOptions Condition::linearization(uint64_t seed) const {
  LinearizationOptions o;
  o.shuffle_mode = shuffle;
  o.shuffle_seed = seed;
  o.set_delimiters(delimiters);
  return o;
}

std::string Condition::label() const {
  std::string out;
  auto add = [&](const std::string& part) { out += (out.empty() ? "" : " ") + part; };
  if (shuffle != ShuffleMode::kNone) add("shuffle=" + std::string(to_string(shuffle)));
  if (delimiters != DelimiterMode::kAll) add("delimiters=" + std::string(to_string(delimiters)));
  if (structure != StructureMode::kNone) add("structure=" + std::string(to_string(structure)));
  return out.empty() ? "proper" : out;
}

json Condition::to_json() const {
  return {{"shuffle", std::string(to_string(shuffle))},
          {"delimiters", std::string(to_string(delimiters))},
          {"structure", std::string(to_string(structure))}};
}

Condition Condition::from_json(const json& j) {
  Condition c;
  if (j.contains("shuffle")) c.shuffle = parse_shuffle_mode(j.at("shuffle").get<std::string>());
  if (j.contains("delimiters")) c.delimiters = parse_delimiter_mode(j.at("delimiters").get<std::string>());
  if (j.contains("structure")) c.structure = parse_structure_mode(j.at("structure").get<std::string>());
  return c;
}

void AblationGrid::validate() const {
  if (cells.empty()) throw std::invalid_argument("ablation grid has no cells");
  if (seeds.empty()) throw std::invalid_argument("ablation grid has no seeds");
  if (ks.empty()) throw std::invalid_argument("ablation grid has no cutoffs");
  for (size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1 || (i > 0 && ks[i] <= ks[i - 1])) {
      throw std::invalid_argument("ablation grid cutoffs must be positive and increasing");
    }
  }
  for (const auto& c : cells) {
    if (c.test.structure != c.train.structure) {
      throw std::invalid_argument("test condition must use the structure mode of its training condition");
    }
  }
  training.validate();
}

json AblationGrid::to_json() const {
  json cj = json::array();
  for (const auto& c : cells) {
    json e = {{"train", c.train.to_json()}, {"test", c.test.to_json()}};
    if (!c.label.empty()) e["label"] = c.label;
    cj.push_back(std::move(e));
  }
  return {{"title", title},
          {"layout", layout == ReportLayout::kModel ? "model" : "train_test"},
          {"cells", cj},
          {"training", training.to_json()},
          {"ks", ks},
          {"seeds", seeds}};
}

AblationGrid AblationGrid::from_json(const json& j) {
  AblationGrid g;
  if (j.contains("preset")) {
    const auto name = j.at("preset").get<std::string>();
    if (name == "shuffle") {
      g = shuffle_grid();
    } else if (name == "delimiter") {
      g = delimiter_grid();
    } else if (name == "structure") {
      g = structure_grid();
    } else {
      throw std::invalid_argument("unknown grid preset '" + name + "'");
    }
  }
  g.title = j.value("title", g.title);
  if (j.contains("layout")) {
    const auto l = j.at("layout").get<std::string>();
    if (l == "model") {
      g.layout = ReportLayout::kModel;
    } else if (l == "train_test") {
      g.layout = ReportLayout::kTrainTest;
    } else {
      throw std::invalid_argument("unknown report layout '" + l + "'");
    }
  }
  if (j.contains("cells")) {
    g.cells.clear();
    for (const auto& e : j.at("cells")) {
      GridCell c;
      c.train = Condition::from_json(e.at("train"));
      c.test = e.contains("test") ? Condition::from_json(e.at("test")) : c.train;
      c.label = e.value("label", "");
      g.cells.push_back(std::move(c));
    }
  }
  if (j.contains("training")) g.training = TrainingConfig::from_json(j.at("training"));
  if (j.contains("ks")) g.ks = j.at("ks").get<std::vector<int>>();
  if (j.contains("seeds")) g.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  g.validate();
  return g;
}

AblationGrid AblationGrid::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

AblationGrid AblationGrid::shuffle_grid() {
  AblationGrid g;
  g.title = "Shuffled tables";
  for (ShuffleMode train : {ShuffleMode::kNone, ShuffleMode::kBoth}) {
    for (ShuffleMode test : {ShuffleMode::kNone, ShuffleMode::kRow, ShuffleMode::kColumn, ShuffleMode::kBoth}) {
      GridCell c;
      c.train.shuffle = train;
      c.test.shuffle = test;
      g.cells.push_back(c);
    }
  }
  return g;
}

AblationGrid AblationGrid::delimiter_grid() {
  AblationGrid g;
  g.title = "Cell and row delimiters";
  for (DelimiterMode train : {DelimiterMode::kAll, DelimiterMode::kNone}) {
    for (DelimiterMode test : {DelimiterMode::kAll, DelimiterMode::kCell, DelimiterMode::kRow, DelimiterMode::kNone}) {
      GridCell c;
      c.train.delimiters = train;
      c.test.delimiters = test;
      g.cells.push_back(c);
    }
  }
  return g;
}

AblationGrid AblationGrid::structure_grid() {
  AblationGrid g;
  g.title = "Structure encoding";
  g.layout = ReportLayout::kModel;
  const std::pair<StructureMode, const char*> modes[] = {
      {StructureMode::kNone, "bi-encoder"},
      {StructureMode::kAuxEmbeddings, "+ row/column embeddings"},
      {StructureMode::kHardMask, "+ hard attention mask"},
      {StructureMode::kSoftBias, "+ soft relation bias"},
  };
  for (const auto& [mode, name] : modes) {
    GridCell c;
    c.train.structure = mode;
    c.test.structure = mode;
    c.label = name;
    g.cells.push_back(c);
  }
  return g;
}

// ---- reports --------------------------------------------------------------------

std::string_view to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::kMarkdown: return "markdown";
    case ReportFormat::kCsv: return "csv";
    case ReportFormat::kJson: return "json";
  }
  return "markdown";
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  throw std::invalid_argument("unknown report format '" + std::string(name) + "'");
}

json ReportTable::to_json() const {
  json rj = json::array();
  for (const auto& r : rows) {
    json acc = json::object();
    if (!r.failed()) {
      for (size_t i = 0; i < ks.size(); ++i) acc["@" + std::to_string(ks[i])] = r.accuracy[i];
    }
    json e = {{"labels", r.labels}, {"accuracy", r.failed() ? json(nullptr) : acc}};
    if (r.failed()) e["error"] = r.error;
    rj.push_back(std::move(e));
  }
  return {{"title", title}, {"label_columns", label_columns}, {"ks", ks}, {"rows", rj}};
}

ReportTable ReportTable::from_json(const json& j) {
  ReportTable t;
  t.title = j.value("title", "");
  t.label_columns = j.at("label_columns").get<std::vector<std::string>>();
  t.ks = j.at("ks").get<std::vector<int>>();
  for (const auto& e : j.at("rows")) {
    ReportRow r;
    r.labels = e.at("labels").get<std::vector<std::string>>();
    r.error = e.value("error", "");
    if (!r.failed()) {
      for (int k : t.ks) r.accuracy.push_back(e.at("accuracy").at("@" + std::to_string(k)).get<double>());
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::string render_report(const ReportTable& report, ReportFormat format) {
  for (const auto& r : report.rows) {
    if (r.labels.size() != report.label_columns.size()) throw std::logic_error("report row label count mismatch");
    if (!r.failed() && r.accuracy.size() != report.ks.size()) throw std::logic_error("report row value count mismatch");
  }
  if (format == ReportFormat::kJson) return report.to_json().dump(2) + "\n";
  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    for (const auto& c : report.label_columns) out << csv_field(c) << ',';
    for (int k : report.ks) out << '@' << k << ',';
    out << "error\n";
    for (const auto& r : report.rows) {
      for (const auto& l : r.labels) out << csv_field(l) << ',';
      for (size_t i = 0; i < report.ks.size(); ++i) out << (r.failed() ? "ERR" : format_double(r.accuracy[i])) << ',';
      out << csv_field(r.error) << '\n';
    }
    return out.str();
  }
  if (!report.title.empty()) out << "### " << report.title << "\n\n";
  out << '|';
  for (const auto& c : report.label_columns) out << ' ' << c << " |";
  for (int k : report.ks) out << " @" << k << " |";
  out << "\n|";
  for (size_t i = 0; i < report.label_columns.size(); ++i) out << "---|";
  for (size_t i = 0; i < report.ks.size(); ++i) out << "---:|";
  out << '\n';
  char buf[32];
  for (const auto& r : report.rows) {
    out << '|';
    for (const auto& l : r.labels) out << ' ' << l << " |";
    for (size_t i = 0; i < report.ks.size(); ++i) {
      if (r.failed()) {
        out << " ERR |";
      } else {
        std::snprintf(buf, sizeof buf, " %.2f |", 100.0 * r.accuracy[i]);
        out << buf;
      }
    }
    out << '\n';
  }
  return out.str();
}

void emit_report(const ReportTable& report, ReportFormat format, const std::filesystem::path& path) {
  write_text(path, render_report(report, format));
}

ReportTable parse_report_csv(std::string_view csv) {
  ReportTable t;
  std::vector<std::string_view> lines;
  size_t pos = 0;
  while (pos < csv.size()) {
    size_t nl = csv.find('\n', pos);
    if (nl == std::string_view::npos) nl = csv.size();
    if (nl > pos) lines.push_back(csv.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) throw DataError("empty report csv");
  const auto head = split_csv_line(lines[0]);
  if (head.empty() || head.back() != "error") throw DataError("report csv: last column must be 'error'");
  size_t first_k = head.size() - 1;
  while (first_k > 0 && head[first_k - 1].starts_with("@")) --first_k;
  t.label_columns.assign(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(first_k));
  for (size_t i = first_k; i + 1 < head.size(); ++i) t.ks.push_back(std::stoi(head[i].substr(1)));
  for (size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_csv_line(lines[li]);
    if (f.size() != head.size()) throw DataError("report csv line " + std::to_string(li + 1) + ": wrong field count");
    ReportRow r;
    r.labels.assign(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(first_k));
    r.error = f.back();
    if (!r.failed()) {
      for (size_t i = first_k; i + 1 < f.size(); ++i) {
        double v = 0;
        auto res = std::from_chars(f[i].data(), f[i].data() + f[i].size(), v);
        if (res.ec != std::errc() || res.ptr != f[i].data() + f[i].size()) {
          throw DataError("report csv line " + std::to_string(li + 1) + ": bad value '" + f[i] + "'");
        }
        r.accuracy.push_back(v);
      }
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

// ---- runner ---------------------------------------------------------------------

AblationResult run_ablation(const AblationGrid& grid, const SyntheticSpec& spec, const EncoderConfig& encoder,
                            const AblationOptions& options) {
  grid.validate();
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  const SyntheticData data = generate_synthetic(spec);
  std::vector<Question> all = data.train;
  all.insert(all.end(), data.test.begin(), data.test.end());
  const Vocab vocab = build_vocab(data.corpus, all);

  EncoderConfig base = encoder;
  base.vocab_size = static_cast<int>(vocab.size());

  if (options.output_dir) std::filesystem::create_directories(*options.output_dir / "models");

  struct Trained {
    std::unique_ptr<BiEncoder<float>> model;
    TrainResult training;
    std::string error;
  };
  std::map<std::string, Trained> models;
  std::map<std::string, DenseIndex> indexes;

  AblationResult result;
  result.table.title = grid.title;
  result.table.ks = grid.ks;
  if (grid.layout == ReportLayout::kModel) {
    result.table.label_columns = {"Model"};
  } else {
    result.table.label_columns = {"Train", "Test"};
  }
  if (grid.seeds.size() > 1) result.table.label_columns.push_back("Seed");

  for (uint64_t seed : grid.seeds) {
    for (const GridCell& cell : grid.cells) {
      CellResult cr;
      cr.cell = cell;
      cr.seed = seed;
      EncoderConfig cfg = base;
      cfg.structure_mode = cell.train.structure;
      TrainingConfig tc = grid.training;
      tc.seed = seed;
      const json key_json = {{"spec", spec.to_json()},
                             {"encoder", cfg.to_json()},
                             {"training", tc.to_json()},
                             {"condition", cell.train.to_json()}};
      cr.model_key = hex_hash(key_json.dump());

      auto it = models.find(cr.model_key);
      if (it == models.end()) {
        Trained t;
        try {
          log("training " + cell.train.label() + " seed " + std::to_string(seed));
          t.model = std::make_unique<BiEncoder<float>>(cfg);
          t.model->initialize(derive_seed(seed, "init"));
          t.training = train(*t.model, data.train, data.corpus, vocab, tc,
                             cell.train.linearization(train_shuffle_seed(seed)));
          if (t.training.diverged) t.error = "training diverged (non-finite loss)";
          if (options.output_dir && t.error.empty()) {
            t.model->save(*options.output_dir / "models" / (cr.model_key + ".ckpt"));
          }
        } catch (const std::exception& e) {
          t.error = e.what();
        }
        it = models.emplace(cr.model_key, std::move(t)).first;
      }
      cr.training = it->second.training;
      cr.error = it->second.error;

      if (cr.error.empty()) {
        try {
          const std::string index_key = cr.model_key + "/" + cell.test.to_json().dump();
          auto ix = indexes.find(index_key);
          if (ix == indexes.end()) {
            ix = indexes
                     .emplace(index_key, build_index(*it->second.model, data.corpus, vocab,
                                                     cell.test.linearization(test_shuffle_seed(seed))))
                     .first;
          }
          cr.report = evaluate(ix->second, *it->second.model, vocab, data.test, data.corpus, grid.ks);
        } catch (const std::exception& e) {
          cr.error = e.what();
        }
      }

      ReportRow row;
      if (grid.layout == ReportLayout::kModel) {
        row.labels = {cell.label.empty() ? std::string(to_string(cell.train.structure)) : cell.label};
      } else {
        row.labels = {cell.train.label(), cell.test.label()};
        if (!cell.label.empty()) row.labels[0] = cell.label;
      }
      if (grid.seeds.size() > 1) row.labels.push_back(std::to_string(seed));
      if (cr.report) {
        row.accuracy = cr.report->accuracy;
      } else {
        row.error = cr.error.empty() ? "unknown failure" : cr.error;
      }
      log(row.labels[0] + " -> " + (row.failed() ? "ERR " + row.error : format_double(row.accuracy[0])));
      result.table.rows.push_back(std::move(row));
      result.cells.push_back(std::move(cr));
    }
  }

  if (options.output_dir) {
    const auto& dir = *options.output_dir;
    emit_report(result.table, ReportFormat::kMarkdown, dir / "report.md");
    emit_report(result.table, ReportFormat::kCsv, dir / "report.csv");
    emit_report(result.table, ReportFormat::kJson, dir / "report.json");
    json cells = json::array();
    for (const auto& c : result.cells) {
      json e = {{"train", c.cell.train.to_json()},
                {"test", c.cell.test.to_json()},
                {"seed", c.seed},
                {"model_key", c.model_key},
                {"train_shuffle_seed", train_shuffle_seed(c.seed)},
                {"test_shuffle_seed", test_shuffle_seed(c.seed)},
                {"epoch_loss", c.training.epoch_loss}};
      if (c.report) e["eval"] = c.report->to_json();
      if (!c.error.empty()) e["error"] = c.error;
      cells.push_back(std::move(e));
    }
    json manifest = {{"spec", spec.to_json()},
                     {"spec_hash", spec.hash()},
                     {"grid", grid.to_json()},
                     {"grid_hash", hex_hash(grid.to_json().dump())},
                     {"encoder", base.to_json()},
                     {"encoder_hash", hex_hash(base.to_json().dump())},
                     {"seeds", grid.seeds},
                     {"cells", cells},
                     {"reports", {"report.md", "report.csv", "report.json"}}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  }
  return result;
}

}  // namespace tabret
