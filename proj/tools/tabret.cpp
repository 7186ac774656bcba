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

// Command-line front end: data preparation, training, indexing, retrieval,
// evaluation and ablation grids.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tabret/encoder.hpp"
#include "tabret/experiments.hpp"
#include "tabret/kernels.hpp"
#include "tabret/linearizer.hpp"
#include "tabret/retrieval.hpp"
#include "tabret/synthetic.hpp"
#include "tabret/table.hpp"
#include "tabret/tokenizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tabret;

namespace {

struct LinFlags {
  std::string delimiters = "all";
  std::string shuffle = "none";
  uint64_t seed = 0;
  int budget = 100;

  void add(CLI::App* app) {
    app->add_option("--delimiters", delimiters, "Delimiters kept: all, cell, row or none")
        ->check(CLI::IsMember({"all", "cell", "row", "none"}));
    app->add_option("--shuffle", shuffle, "Shuffle: none, row, column or both")
        ->check(CLI::IsMember({"none", "row", "column", "both"}));
    app->add_option("--seed", seed, "Shuffle seed");
    app->add_option("--budget", budget, "Word budget of a linearized table")->check(CLI::PositiveNumber);
  }

  LinearizationOptions options() const {
    LinearizationOptions o;
    o.set_delimiters(parse_delimiter_mode(delimiters));
    o.shuffle_mode = parse_shuffle_mode(shuffle);
    o.shuffle_seed = seed;
    o.word_budget = budget;
    o.validate();
    return o;
  }
};

struct ModelFlags {
  std::string config_path;
  std::string preset = "tiny";
  std::string structure;
  std::string position_mode;
  bool rank = false;
  int max_len = 0;

  void add(CLI::App* app) {
    app->add_option("--encoder-config", config_path, "Encoder config JSON")->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "Size preset: tiny, medium, base or large");
    app->add_option("--structure", structure, "none, aux_embeddings, hard_mask or soft_bias");
    app->add_option("--position-mode", position_mode, "sequential or cell_reset");
    app->add_flag("--rank", rank, "Enable rank embeddings");
    app->add_option("--max-len", max_len, "Maximum sequence length");
  }

  EncoderConfig config() const {
    EncoderConfig c = config_path.empty() ? EncoderConfig::preset(preset) : EncoderConfig::load(config_path);
    if (!structure.empty()) c.structure_mode = parse_structure_mode(structure);
    if (!position_mode.empty()) c.position_mode = parse_position_mode(position_mode);
    if (rank) c.use_rank_embedding = true;
    if (max_len > 0) c.max_len = max_len;
    return c;
  }
};

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << text;
}

// Accepts a bare spec or the {"spec", "hash"} file written by generate-data.
SyntheticSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return SyntheticSpec::from_json(j.contains("spec") ? j.at("spec") : j);
}

std::vector<Question> load_question_files(const std::vector<std::string>& paths, const Corpus& corpus) {
  std::vector<Question> out;
  for (const auto& p : paths) {
    auto qs = load_questions(p, corpus);
    out.insert(out.end(), qs.begin(), qs.end());
  }
  return out;
}

json linearized_json(const std::string& id, const LinearizedTable& lin) {
  json provenance = json::array();
  for (const auto& p : lin.provenance) provenance.push_back({{"segment", p.segment}, {"row", p.row}, {"col", p.col}});
  return {{"id", id}, {"words", lin.words}, {"provenance", provenance}};
}

json sequence_json(const TokenizedSequence& s) {
  return {{"token_ids", s.token_ids}, {"segment_ids", s.segment_ids}, {"position_ids", s.position_ids},
          {"row_ids", s.row_ids},     {"col_ids", s.col_ids},         {"rank_ids", s.rank_ids}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Table retrieval with structure-aware bi-encoders"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tabret 0.1.0");

  // linearize
  auto* lin_cmd = app.add_subcommand("linearize", "Print linearized tables");
  std::string lin_corpus, lin_id, lin_format = "jsonl";
  LinFlags lin_flags;
  lin_cmd->add_option("corpus", lin_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  lin_cmd->add_option("--id", lin_id, "Only this table");
  lin_cmd->add_option("--format", lin_format, "jsonl or text")->check(CLI::IsMember({"jsonl", "text"}));
  lin_flags.add(lin_cmd);

  // build-vocab
  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build a word vocabulary");
  std::string vocab_corpus, vocab_out;
  std::vector<std::string> vocab_questions;
  int min_freq = 1;
  vocab_cmd->add_option("corpus", vocab_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  vocab_cmd->add_option("--questions", vocab_questions, "Question JSONL files")->check(CLI::ExistingFile);
  vocab_cmd->add_option("--min-freq", min_freq, "Minimum word frequency")->check(CLI::PositiveNumber);
  vocab_cmd->add_option("-o,--out", vocab_out, "Output vocabulary file")->required();

  // encode
  auto* enc_cmd = app.add_subcommand("encode", "Tokenize a table or a question");
  std::string enc_corpus, enc_vocab, enc_id, enc_question, enc_position = "sequential";
  int enc_max_len = 128;
  LinFlags enc_flags;
  enc_cmd->add_option("--vocab", enc_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  enc_cmd->add_option("--corpus", enc_corpus, "Corpus JSONL")->check(CLI::ExistingFile);
  enc_cmd->add_option("--id", enc_id, "Table id");
  enc_cmd->add_option("--question", enc_question, "Question text");
  enc_cmd->add_option("--position-mode", enc_position, "sequential or cell_reset");
  enc_cmd->add_option("--max-len", enc_max_len, "Maximum sequence length")->check(CLI::Range(2, 1 << 20));
  enc_flags.add(enc_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "Fine-tune a bi-encoder");
  std::string tr_corpus, tr_vocab, tr_out, tr_log;
  std::vector<std::string> tr_questions;
  TrainingConfig tr_cfg;
  ModelFlags tr_model;
  LinFlags tr_lin;
  train_cmd->add_option("--corpus", tr_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--questions", tr_questions, "Training question JSONL")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--vocab", tr_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("-o,--out", tr_out, "Output checkpoint")->required();
  train_cmd->add_option("--log", tr_log, "Loss trace JSON");
  train_cmd->add_option("--batch-size", tr_cfg.batch_size, "Questions per batch")->check(CLI::Range(2, 1 << 20));
  train_cmd->add_option("--lr", tr_cfg.learning_rate, "Adam learning rate");
  train_cmd->add_option("--epochs", tr_cfg.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--hard-negatives", tr_cfg.hard_negatives_per_question, "Mined negatives per question");
  train_cmd->add_option("--mining-top-n", tr_cfg.mining_top_n, "Candidates inspected when mining");
  train_cmd->add_option("--remine-every", tr_cfg.remine_every, "Re-mine negatives every N epochs (0: once)");
  train_cmd->add_option("--train-seed", tr_cfg.seed, "Initialization and batching seed");
  tr_model.add(train_cmd);
  tr_lin.add(train_cmd);

  // index
  auto* index_cmd = app.add_subcommand("index", "Encode every table into a dense index");
  std::string ix_model, ix_corpus, ix_vocab, ix_out;
  LinFlags ix_lin;
  index_cmd->add_option("--model", ix_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  index_cmd->add_option("--corpus", ix_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  index_cmd->add_option("--vocab", ix_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  index_cmd->add_option("-o,--out", ix_out, "Output index")->required();
  ix_lin.add(index_cmd);

  // retrieve
  auto* ret_cmd = app.add_subcommand("retrieve", "Top-k tables for questions");
  std::string rt_model, rt_index, rt_vocab, rt_question;
  size_t rt_k = 10;
  ret_cmd->add_option("--model", rt_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  ret_cmd->add_option("--index", rt_index, "Index file")->required()->check(CLI::ExistingFile);
  ret_cmd->add_option("--vocab", rt_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  ret_cmd->add_option("-q,--question", rt_question, "Question text")->required();
  ret_cmd->add_option("-k", rt_k, "Number of results")->check(CLI::PositiveNumber);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Top-k retrieval accuracy");
  std::string ev_model, ev_index, ev_vocab, ev_corpus, ev_json, ev_markdown, ev_label = "model";
  std::vector<std::string> ev_questions;
  std::vector<int> ev_ks{1, 5, 10, 20, 50};
  eval_cmd->add_option("--model", ev_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--index", ev_index, "Index file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--vocab", ev_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--corpus", ev_corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--questions", ev_questions, "Question JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ks", ev_ks, "Cutoffs");
  eval_cmd->add_option("--json", ev_json, "JSON output (default stdout)");
  eval_cmd->add_option("--markdown", ev_markdown, "Markdown table output");
  eval_cmd->add_option("--label", ev_label, "Row label of the markdown table");

  // generate-data
  auto* gen_cmd = app.add_subcommand("generate-data", "Write a seeded synthetic corpus and questions");
  std::string gen_spec_path, gen_out;
  SyntheticSpec gen_spec;
  gen_cmd->add_option("--spec", gen_spec_path, "Spec JSON")->check(CLI::ExistingFile);
  gen_cmd->add_option("--tables", gen_spec.table_count, "Number of tables");
  gen_cmd->add_option("--questions-per-table", gen_spec.questions_per_table, "Questions per table");
  gen_cmd->add_option("--data-seed", gen_spec.seed, "Generator seed");
  gen_cmd->add_option("-o,--out", gen_out, "Output directory")->required();

  // ablate
  auto* abl_cmd = app.add_subcommand("ablate", "Run an ablation grid");
  std::string abl_grid, abl_preset, abl_spec, abl_out;
  std::vector<uint64_t> abl_seeds;
  int abl_epochs = -1;
  ModelFlags abl_model;
  abl_cmd->add_option("--grid", abl_grid, "Grid JSON")->check(CLI::ExistingFile);
  abl_cmd->add_option("--grid-preset", abl_preset, "shuffle, delimiter or structure")
      ->check(CLI::IsMember({"shuffle", "delimiter", "structure"}));
  abl_cmd->add_option("--spec", abl_spec, "Synthetic spec JSON")->check(CLI::ExistingFile);
  abl_cmd->add_option("--seeds", abl_seeds, "Training seeds (one report row per seed)");
  abl_cmd->add_option("--epochs", abl_epochs, "Override training epochs");
  abl_cmd->add_option("-o,--out", abl_out, "Output directory")->required();
  abl_model.add(abl_cmd);
  abl_cmd->get_option("--grid-preset")->excludes(abl_cmd->get_option("--grid"));

  // report
  auto* rep_cmd = app.add_subcommand("report", "Render a report in another format");
  std::string rep_in, rep_out, rep_format = "markdown";
  rep_cmd->add_option("input", rep_in, "report.json, report.csv or an ablation directory")->required();
  rep_cmd->add_option("--format", rep_format, "markdown, csv or json")
      ->check(CLI::IsMember({"markdown", "md", "csv", "json"}));
  rep_cmd->add_option("-o,--out", rep_out, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*lin_cmd) {
      const Corpus corpus = load_corpus(lin_corpus);
      const auto opts = lin_flags.options();
      for (const Table& t : corpus) {
        if (!lin_id.empty() && t.id != lin_id) continue;
        const LinearizedTable lin = prepare_and_linearize(t, opts);
        if (lin_format == "jsonl") {
          std::cout << linearized_json(t.id, lin).dump() << '\n';
        } else {
          std::string line = t.id + "\t";
          for (size_t i = 0; i < lin.words.size(); ++i) line += (i ? " " : "") + lin.words[i];
          std::cout << line << '\n';
        }
      }
      if (!lin_id.empty() && !corpus.contains(lin_id)) throw DataError("unknown table id '" + lin_id + "'");
    } else if (*vocab_cmd) {
      const Corpus corpus = load_corpus(vocab_corpus);
      const Vocab vocab = build_vocab(corpus, load_question_files(vocab_questions, corpus), min_freq);
      vocab.save(vocab_out);
      std::cerr << "vocabulary: " << vocab.size() << " tokens\n";
    } else if (*enc_cmd) {
      const Vocab vocab = Vocab::load(enc_vocab);
      const PositionMode pm = parse_position_mode(enc_position);
      if (!enc_question.empty()) {
        std::cout << sequence_json(encode_question(enc_question, vocab, enc_max_len)).dump() << '\n';
      } else {
        if (enc_corpus.empty()) throw std::invalid_argument("encode needs --question or --corpus");
        const Corpus corpus = load_corpus(enc_corpus);
        const auto opts = enc_flags.options();
        for (const Table& t : corpus) {
          if (!enc_id.empty() && t.id != enc_id) continue;
          json j = sequence_json(encode_table(t, opts, vocab, pm, enc_max_len));
          j["id"] = t.id;
          std::cout << j.dump() << '\n';
        }
      }
    } else if (*train_cmd) {
      const Corpus corpus = load_corpus(tr_corpus);
      const auto questions = load_question_files(tr_questions, corpus);
      const Vocab vocab = Vocab::load(tr_vocab);
      EncoderConfig cfg = tr_model.config();
      cfg.vocab_size = static_cast<int>(vocab.size());
      BiEncoder<float> model(cfg);
      model.initialize(derive_seed(tr_cfg.seed, "init"));
      std::cerr << "kernels: " << kernels::to_string(kernels::active_isa()) << '\n';
      const TrainResult res = train(model, questions, corpus, vocab, tr_cfg, tr_lin.options(), [](int e, double l) {
        std::fprintf(stderr, "epoch %d loss %.5f\n", e + 1, l);
      });
      if (res.diverged) throw std::runtime_error("training diverged (non-finite loss)");
      model.save(tr_out);
      if (!tr_log.empty()) {
        write_json(tr_log, {{"epoch_loss", res.epoch_loss},
                            {"first_step_loss", res.first_step_loss},
                            {"steps", res.steps},
                            {"training", tr_cfg.to_json()},
                            {"encoder", cfg.to_json()}});
      }
    } else if (*index_cmd) {
      auto model = BiEncoder<float>::load(ix_model);
      const DenseIndex index = build_index(model, load_corpus(ix_corpus), Vocab::load(ix_vocab), ix_lin.options());
      index.save(ix_out);
      std::cerr << "indexed " << index.size() << " tables\n";
    } else if (*ret_cmd) {
      auto model = BiEncoder<float>::load(rt_model);
      const DenseIndex index = DenseIndex::load(rt_index);
      const Vocab vocab = Vocab::load(rt_vocab);
      const auto hits = retrieve(index, encode_question_vector(model, vocab, rt_question), std::min(rt_k, index.size()));
      json out = json::array();
      for (const auto& h : hits) out.push_back({{"id", h.id}, {"score", h.score}});
      std::cout << out.dump(2) << '\n';
    } else if (*eval_cmd) {
      auto model = BiEncoder<float>::load(ev_model);
      const DenseIndex index = DenseIndex::load(ev_index);
      const Corpus corpus = load_corpus(ev_corpus);
      const auto questions = load_question_files(ev_questions, corpus);
      const EvalReport report = evaluate(index, model, Vocab::load(ev_vocab), questions, corpus, ev_ks);
      write_json(ev_json, report.to_json());
      if (!ev_markdown.empty()) write_text(ev_markdown, report.to_markdown(ev_label));
    } else if (*gen_cmd) {
      SyntheticSpec spec = gen_spec;
      if (!gen_spec_path.empty()) spec = load_spec(gen_spec_path);
      const SyntheticData data = generate_synthetic(spec);
      fs::create_directories(gen_out);
      save_corpus(data.corpus, fs::path(gen_out) / "corpus.jsonl");
      save_questions(data.train, fs::path(gen_out) / "train.jsonl");
      save_questions(data.test, fs::path(gen_out) / "test.jsonl");
      write_json((fs::path(gen_out) / "spec.json").string(), {{"spec", spec.to_json()}, {"hash", spec.hash()}});
      std::cerr << data.corpus.size() << " tables, " << data.train.size() << " train / " << data.test.size()
                << " test questions\n";
    } else if (*abl_cmd) {
      AblationGrid grid;
      if (!abl_grid.empty()) {
        grid = AblationGrid::load(abl_grid);
      } else {
        grid = AblationGrid::from_json({{"preset", abl_preset.empty() ? "structure" : abl_preset}});
      }
      if (!abl_seeds.empty()) grid.seeds = abl_seeds;
      if (abl_epochs >= 0) grid.training.epochs = abl_epochs;
      SyntheticSpec spec;
      if (!abl_spec.empty()) {
        spec = load_spec(abl_spec);
      }
      AblationOptions opts;
      opts.output_dir = abl_out;
      opts.log = [](const std::string& m) { std::cerr << m << '\n'; };
      const AblationResult res = run_ablation(grid, spec, abl_model.config(), opts);
      std::cout << render_report(res.table, ReportFormat::kMarkdown);
    } else if (*rep_cmd) {
      fs::path in = rep_in;
      if (fs::is_directory(in)) in /= "report.json";
      std::ifstream f(in, std::ios::binary);
      if (!f) throw DataError("cannot open " + in.string());
      std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
      const ReportTable table = in.extension() == ".csv" ? parse_report_csv(text) : ReportTable::from_json(json::parse(text));
      write_text(rep_out, render_report(table, parse_report_format(rep_format)));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
