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

// Acceptance suite: one PASS/FAIL line per criterion, each checked at its
// stated tolerance. Criteria listed with --known-failures still print FAIL
// but do not change the exit status; any other failure does.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tabret/encoder.hpp"
#include "tabret/experiments.hpp"
#include "tabret/gradcheck.hpp"
#include "tabret/kernels.hpp"
#include "tabret/linearizer.hpp"
#include "tabret/retrieval.hpp"
#include "tabret/synthetic.hpp"
#include "tabret/tokenizer.hpp"
#include "test_util.hpp"

namespace tabret {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Result lines go to stdout and, with --log, to a file as well.
FILE* g_log = nullptr;

void emit(const std::string& line) {
  std::printf("%s\n", line.c_str());
  std::fflush(stdout);
  if (g_log) {
    std::fprintf(g_log, "%s\n", line.c_str());
    std::fflush(g_log);
  }
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

constexpr StructureMode kModes[] = {StructureMode::kNone, StructureMode::kAuxEmbeddings, StructureMode::kHardMask,
                                    StructureMode::kSoftBias};

// Random word tables with a vocabulary covering them.
struct RandomTables {
  Corpus corpus;
  Vocab vocab;
};

RandomTables random_tables(uint64_t seed, size_t count, size_t max_rows = 6, size_t max_cols = 5) {
  Rng rng = make_rng(seed, "acceptance-tables");
  RandomTables out;
  for (size_t i = 0; i < count; ++i) {
    out.corpus.add(sanitize_table(testing::random_table(rng, "r" + std::to_string(i), max_rows, max_cols)));
  }
  out.vocab = build_vocab(out.corpus, {});
  return out;
}

EncoderConfig tiny_for(const Vocab& vocab, StructureMode mode) {
  EncoderConfig c = EncoderConfig::preset("tiny");
  c.vocab_size = static_cast<int>(vocab.size());
  c.structure_mode = mode;
  return c;
}

// ---- model-level criteria ------------------------------------------------------

Outcome gradient_fidelity() {
  const auto start = Clock::now();
  SyntheticSpec spec;
  spec.table_count = 6;
  spec.entity_vocab_size = 200;
  const SyntheticData data = generate_synthetic(spec);
  const Vocab vocab = build_vocab(data.corpus, data.train);
  std::vector<TokenizedSequence> qs, ts;
  for (size_t i = 0; i < 3; ++i) {
    qs.push_back(encode_question(data.train[i].text, vocab, 64));
    ts.push_back(encode_table(data.corpus.at(data.train[i].positive_table_id), {}, vocab, PositionMode::kSequential, 64));
  }
  ts.push_back(encode_table(data.corpus[5], {}, vocab, PositionMode::kSequential, 64));

  std::string detail;
  bool pass = true;
  for (StructureMode mode : kModes) {
    EncoderConfig c;
    c.layers = 1;
    c.heads = 2;
    c.hidden = 8;
    c.ff_dim = 16;
    c.max_len = 64;
    c.vocab_size = static_cast<int>(vocab.size());
    c.structure_mode = mode;
    c.use_rank_embedding = true;
    c.dropout = 0.0;
    c.init_std = 0.5;
    BiEncoder<double> model(c);
    model.initialize(17);
    // Move the zero-initialized extras off zero so their gradients are
    // probed at a generic point.
    Rng jitter = make_rng(17, "jitter");
    std::normal_distribution<double> n(0.0, 0.1);
    for (Tensor<double>* p : model.parameters())
      for (auto& v : p->data) v += n(jitter);
    model.set_requires_grad(true);
    LossFn fn = [&](bool backward) {
      Tape<double> tape;
      Var<double> loss = contrastive_batch_loss<double>(tape, model, qs, ts);
      if (backward) tape.backward(loss);
      return loss.item();
    };
    // Key biases and the table tower's last output bias shift every score in
    // a softmax row equally, so their gradient is exactly zero and a central
    // difference there only measures roundoff. They are not probed.
    std::vector<Tensor<double>*> params;
    const std::string last = "table.layer" + std::to_string(c.layers - 1) + ".ffn_ln.bias";
    for (auto& [name, p] : model.named_parameters()) {
      if (name.find("attention.key.bias") == std::string::npos && name != last) params.push_back(p);
    }
    const double err = finite_diff_check(fn, params, 20, 1e-4, 29).max_relative_error;
    pass = pass && err < 1e-4;
    detail += fmt("%s=%.2e ", std::string(to_string(mode)).c_str(), err);
  }
  const double secs = seconds_since(start);
  pass = pass && secs < 120;
  return {pass, detail + fmt("(limit 1e-4, %.1fs of 120s)", secs)};
}

Outcome mask_exactness() {
  RandomTables rt = random_tables(1, 100);
  BiEncoder<float> model(tiny_for(rt.vocab, StructureMode::kHardMask));
  model.initialize(1);
  size_t masked = 0, violations = 0;
  for (const Table& t : rt.corpus) {
    TokenizedSequence s = encode_table(t, {}, rt.vocab, PositionMode::kSequential, 128);
    AttentionTrace trace;
    model.encode(s, Tower::kTable, &trace);
    const size_t n = s.size();
    for (const auto& layer : trace.probs)
      for (const auto& probs : layer)
        for (size_t i = 0; i < n; ++i)
          for (size_t j = 0; j < n; ++j)
            if (!hard_mask_visible(s, i, j)) {
              ++masked;
              if (probs[i * n + j] != 0.0f) ++violations;
            }
  }
  return {violations == 0 && masked > 0,
          fmt("%zu forbidden (layer, head, pair) entries, %zu nonzero", masked, violations)};
}

Outcome relation_equivariance() {
  Rng rng = make_rng(2, "equivariance");
  RelationTaxonomy tax;
  LinearizationOptions opts;
  opts.word_budget = 1 << 20;
  size_t mismatches = 0, pairs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Table t = sanitize_table(testing::random_table(rng, "e", 6, 5));
    std::vector<size_t> pr(t.num_rows()), pc(t.num_cols());
    std::iota(pr.begin(), pr.end(), size_t{0});
    std::iota(pc.begin(), pc.end(), size_t{0});
    std::shuffle(pr.begin(), pr.end(), rng);
    std::shuffle(pc.begin(), pc.end(), rng);
    Table p = t;
    for (size_t j = 0; j < pc.size(); ++j) p.header[j] = t.header[pc[j]];
    for (size_t r = 0; r < pr.size(); ++r)
      for (size_t j = 0; j < pc.size(); ++j) p.rows[r][j] = t.rows[pr[r]][pc[j]];
    Corpus both({t, [&] { Table x = p; x.id = "p"; return x; }()});
    const Vocab vocab = build_vocab(both, {});
    const TokenizedSequence a = encode(linearize(t, opts), vocab, PositionMode::kCellReset, 1 << 20);
    const TokenizedSequence b = encode(linearize(p, opts), vocab, PositionMode::kCellReset, 1 << 20);
    if (a.size() != b.size()) return {false, fmt("trial %d: length %zu vs %zu", trial, a.size(), b.size())};

    // Induced token permutation: cell tokens by (row, col, occurrence),
    // everything else by order of appearance.
    std::vector<size_t> inv_r(pr.size()), inv_c(pc.size());
    for (size_t k = 0; k < pr.size(); ++k) inv_r[pr[k]] = k;
    for (size_t k = 0; k < pc.size(); ++k) inv_c[pc[k]] = k;
    std::map<std::tuple<int, int, int>, size_t> where;
    std::map<std::pair<int, int>, int> seen;
    std::vector<size_t> text;
    for (size_t i = 0; i < b.size(); ++i) {
      if (b.row_ids[i] > 0 && b.col_ids[i] > 0) {
        where[{b.row_ids[i], b.col_ids[i], seen[{b.row_ids[i], b.col_ids[i]}]++}] = i;
      } else {
        text.push_back(i);
      }
    }
    seen.clear();
    std::vector<size_t> map;
    size_t next_text = 0;
    for (size_t i = 0; i < a.size(); ++i) {
      int r = a.row_ids[i], c = a.col_ids[i];
      if (r > 0 && c > 0) {
        const int occ = seen[{r, c}]++;
        c = static_cast<int>(inv_c[static_cast<size_t>(c - 1)]) + 1;
        if (r > 1) r = static_cast<int>(inv_r[static_cast<size_t>(r - 2)]) + 2;
        map.push_back(where.at({r, c, occ}));
      } else {
        map.push_back(text.at(next_text++));
      }
      if (a.token_ids[i] != b.token_ids[map.back()]) return {false, fmt("trial %d: token correspondence broken", trial)};
    }
    const auto ra = build_relation_matrix(a, tax), rb = build_relation_matrix(b, tax);
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) {
        ++pairs;
        if (ra[i * n + j] != rb[map[i] * n + map[j]]) ++mismatches;
      }
  }
  return {mismatches == 0, fmt("100 tables, %zu token pairs, %zu mismatches", pairs, mismatches)};
}

Outcome zero_init_equivalence() {
  RandomTables rt = random_tables(3, 50);
  BiEncoder<float> none(tiny_for(rt.vocab, StructureMode::kNone));
  BiEncoder<float> aux(tiny_for(rt.vocab, StructureMode::kAuxEmbeddings));
  BiEncoder<float> soft(tiny_for(rt.vocab, StructureMode::kSoftBias));
  none.initialize(5);
  aux.initialize(5);
  soft.initialize(5);
  size_t differing = 0;
  for (const Table& t : rt.corpus) {
    TokenizedSequence s = encode_table(t, {}, rt.vocab, PositionMode::kSequential, 128);
    const auto want = none.encode(s, Tower::kTable);
    if (aux.encode(s, Tower::kTable) != want) ++differing;
    if (soft.encode(s, Tower::kTable) != want) ++differing;
  }
  return {differing == 0, fmt("50 inputs x 2 modes, %zu not bitwise equal", differing)};
}

// ---- retrieval-level criteria ---------------------------------------------------

std::vector<std::string> brute_force_ranking(const DenseIndex& index, std::span<const float> q) {
  std::vector<std::pair<long double, std::string>> scored;
  for (size_t i = 0; i < index.size(); ++i) {
    long double s = 0;
    for (size_t d = 0; d < index.dim; ++d) s += static_cast<long double>(q[d]) * index.row(i)[d];
    scored.emplace_back(s, index.ids[i]);
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  std::vector<std::string> out;
  for (auto& [s, id] : scored) out.push_back(id);
  return out;
}

Outcome index_exactness() {
  SyntheticSpec spec;
  spec.table_count = 500;
  spec.entity_vocab_size = 6000;
  const SyntheticData data = generate_synthetic(spec);
  const Vocab vocab = build_vocab(data.corpus, data.train);
  EncoderConfig c = EncoderConfig::preset("tiny");
  c.vocab_size = static_cast<int>(vocab.size());
  BiEncoder<float> model(c);
  model.initialize(7);
  const DenseIndex index = build_index(model, data.corpus, vocab, {});
  // A coarsely quantized copy produces many exact score ties.
  DenseIndex coarse_copy = index;
  for (auto& v : coarse_copy.matrix) v = std::round(v);
  const DenseIndex& coarse = coarse_copy;

  Rng rng = make_rng(7, "queries");
  std::normal_distribution<float> g(0.0f, 1.0f);
  size_t wrong = 0, ties = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<float> q;
    if (i % 2 == 0) {
      q = encode_question_vector(model, vocab, data.train[static_cast<size_t>(i)].text);
    } else {
      q.resize(index.dim);
      for (auto& x : q) x = g(rng);
    }
    std::vector<float> qc(q);
    for (auto& x : qc) x = std::round(x);
    for (const DenseIndex* ix : {&index, &coarse}) {
      const auto& query = ix == &index ? q : qc;
      const auto hits = retrieve(*ix, query, ix->size());
      std::vector<std::string> ids;
      for (const auto& h : hits) ids.push_back(h.id);
      if (ids != brute_force_ranking(*ix, query)) ++wrong;
      for (size_t k = 1; k < hits.size(); ++k)
        if (hits[k].score == hits[k - 1].score) ++ties;
    }
  }
  return {wrong == 0, fmt("500 tables, 100 queries x 2 indexes (%zu tied neighbours), %zu rankings differ", ties, wrong)};
}

Outcome linearization_round_trip() {
  Rng rng = make_rng(4, "round-trip");
  size_t failures = 0, over_budget = 0;
  for (int i = 0; i < 1000; ++i) {
    Table t = sanitize_table(testing::random_table(rng, "r", 10, 6));
    LinearizationOptions full;
    full.word_budget = 1 << 20;
    Table back = parse_linearized(linearize(t, full).words);
    back.id = t.id;
    if (back != t) ++failures;

    LinearizationOptions cut;
    cut.word_budget = std::uniform_int_distribution<int>(1, 100)(rng);
    Table head = t;
    head.rows.clear();
    const size_t floor = linearized_word_count(head);
    const size_t words = prepare_and_linearize(t, cut).size();
    if (words > std::max(static_cast<size_t>(cut.word_budget), floor)) ++over_budget;
  }
  return {failures == 0 && over_budget == 0,
          fmt("1000 tables, %zu round-trip failures, %zu over budget", failures, over_budget)};
}

// ---- training criteria -----------------------------------------------------------

std::vector<EvalReport> g_reports;  // every report produced, for monotonicity

Outcome training_sanity() {
  const auto start = Clock::now();
  const SyntheticSpec spec;  // default corpus
  const SyntheticData data = generate_synthetic(spec);
  std::vector<Question> all = data.train;
  all.insert(all.end(), data.test.begin(), data.test.end());
  const Vocab vocab = build_vocab(data.corpus, all);
  EncoderConfig c = EncoderConfig::preset("tiny");
  c.vocab_size = static_cast<int>(vocab.size());
  TrainingConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-3;
  cfg.seed = 13;
  BiEncoder<float> model(c);
  model.initialize(derive_seed(cfg.seed, "init"));

  const DenseIndex before_index = build_index(model, data.corpus, vocab, {});
  const EvalReport before = evaluate(before_index, model, vocab, data.test, data.corpus);
  g_reports.push_back(before);
  const TrainResult tr = train(model, data.train, data.corpus, vocab, cfg, {});
  const DenseIndex after_index = build_index(model, data.corpus, vocab, {});
  const EvalReport after = evaluate(after_index, model, vocab, data.test, data.corpus);
  g_reports.push_back(after);
  const double secs = seconds_since(start);
  const bool pass = !tr.diverged && after.at(1) >= 0.70 && before.at(1) <= 0.20 && secs < 600;
  return {pass, fmt("trained acc@1 %.3f (need >= 0.70), acc@5 %.3f; untrained acc@1 %.3f (need <= 0.20); "
                    "random 1/200; loss %.3f -> %.3f; %.0fs of 600s",
                    after.at(1), after.at(5), before.at(1), tr.epoch_loss.front(), tr.epoch_loss.back(), secs)};
}


const std::vector<uint64_t> kSeeds{13, 14, 15};

const AblationResult& perturbation_runs(std::optional<AblationResult>& cache) {
  if (!cache) {
    AblationGrid g;
    g.title = "Perturbed test tables";
    GridCell proper, shuffled, stripped;
    shuffled.test.shuffle = ShuffleMode::kBoth;
    stripped.test.delimiters = DelimiterMode::kNone;
    g.cells = {proper, shuffled, stripped};
    g.seeds = kSeeds;
    AblationOptions o;
    o.log = [](const std::string& s) { std::fprintf(stderr, "  %s\n", s.c_str()); };
    cache = run_ablation(g, SyntheticSpec{}, EncoderConfig::preset("tiny"), o);
    for (const auto& c : cache->cells)
      if (c.report) g_reports.push_back(*c.report);
  }
  return *cache;
}

double at5(const AblationResult& r, uint64_t seed, const Condition& test) {
  for (const auto& c : r.cells)
    if (c.seed == seed && c.cell.test == test) return c.report ? c.report->at(5) : std::nan("");
  return std::nan("");
}

Outcome directional(std::optional<AblationResult>& cache, const Condition& perturbed, const char* what) {
  const AblationResult& r = perturbation_runs(cache);
  bool pass = true;
  std::string detail;
  for (uint64_t seed : kSeeds) {
    const double clean = at5(r, seed, Condition{}), bad = at5(r, seed, perturbed);
    const double margin = clean - bad;
    pass = pass && std::isfinite(margin) && margin >= 0.02;
    detail += fmt("seed %llu: @5 %.3f proper vs %.3f %s (margin %+.3f); ", static_cast<unsigned long long>(seed),
                  clean, bad, what, margin);
  }
  return {pass, detail + "need margin >= 0.02 on every seed"};
}

Outcome structure_parity(const std::string& report_path) {
  AblationGrid g = AblationGrid::structure_grid();
  AblationOptions o;
  o.log = [](const std::string& s) { std::fprintf(stderr, "  %s\n", s.c_str()); };
  AblationResult r = run_ablation(g, SyntheticSpec{}, EncoderConfig::preset("tiny"), o);
  for (const auto& c : r.cells)
    if (c.report) g_reports.push_back(*c.report);
  const std::string md = render_report(r.table, ReportFormat::kMarkdown);
  emit(md);
  if (!report_path.empty()) emit_report(r.table, ReportFormat::kMarkdown, report_path);

  bool pass = r.table.label_columns == std::vector<std::string>{"Model"} && r.table.rows.size() == 4;
  std::string detail;
  double base = std::nan("");
  for (const auto& c : r.cells) {
    const bool ok = c.report && c.error.empty() && !c.training.diverged;
    if (!ok) {
      pass = false;
      detail += std::string(to_string(c.cell.train.structure)) + " failed: " + c.error + "; ";
      continue;
    }
    const double a1 = c.report->at(1);
    if (c.cell.train.structure == StructureMode::kNone) base = a1;
    detail += fmt("%s %.3f; ", std::string(to_string(c.cell.train.structure)).c_str(), a1);
  }
  for (const auto& c : r.cells) {
    if (c.report && std::abs(c.report->at(1) - base) > 0.10) pass = false;
  }
  if (!std::isfinite(base)) pass = false;
  return {pass, "acc@1 " + detail + "need |mode - none| <= 0.10"};
}

Outcome metric_monotonicity() {
  size_t bad = 0;
  for (const auto& r : g_reports) {
    try {
      r.check();
    } catch (const std::exception&) {
      ++bad;
    }
    for (size_t i = 1; i < r.accuracy.size(); ++i)
      if (r.accuracy[i] < r.accuracy[i - 1]) ++bad;
  }
  return {!g_reports.empty() && bad == 0, fmt("%zu reports, %zu violations", g_reports.size(), bad)};
}

}  // namespace
}  // namespace tabret

int main(int argc, char** argv) {
  using namespace tabret;
  CLI::App app{"tabret acceptance suite"};
  std::vector<std::string> only, known;
  std::string report_path, log_path;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--known-failures", known, "Criteria whose FAIL does not affect the exit status")->delimiter(',');
  app.add_option("--log", log_path, "Also write the result lines to this file");
  app.add_option("--structure-report", report_path, "Write the structure-mode report here (markdown)");
  CLI11_PARSE(app, argc, argv);

  if (!log_path.empty()) {
    g_log = std::fopen(log_path.c_str(), "w");
    if (!g_log) {
      std::fprintf(stderr, "cannot open %s\n", log_path.c_str());
      return 2;
    }
  }
  emit("kernels: " + std::string(kernels::to_string(kernels::active_isa())));
  std::optional<AblationResult> perturbation;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-fidelity", gradient_fidelity},
      {"mask-exactness", mask_exactness},
      {"relation-equivariance", relation_equivariance},
      {"zero-init-equivalence", zero_init_equivalence},
      {"index-exactness", index_exactness},
      {"linearization-round-trip", linearization_round_trip},
      {"training-sanity", training_sanity},
      {"shuffle-directional", [&] { return directional(perturbation, [] {
                                      Condition c;
                                      c.shuffle = ShuffleMode::kBoth;
                                      return c;
                                    }(), "shuffle=both"); }},
      {"delimiter-directional", [&] { return directional(perturbation, [] {
                                        Condition c;
                                        c.delimiters = DelimiterMode::kNone;
                                        return c;
                                      }(), "delimiters=none"); }},
      {"structure-parity", [&] { return structure_parity(report_path); }},
      {"metric-monotonicity", metric_monotonicity},
  };
  for (const auto& name : only) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == name; })) {
      std::fprintf(stderr, "unknown criterion '%s'\n", name.c_str());
      return 2;
    }
  }

  int unexpected = 0, failed = 0, run = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    ++run;
    const bool is_known = std::find(known.begin(), known.end(), name) != known.end();
    const char* note = is_known ? (o.pass ? " (listed as a known failure but passed)" : " (known failure)") : "";
    emit(fmt("%s %s: ", o.pass ? "PASS" : "FAIL", name.c_str()) + o.detail +
         fmt(" [%.1fs]%s", seconds_since(start), note));
    if (!o.pass) {
      ++failed;
      if (!is_known) ++unexpected;
    }
  }
  emit(fmt("%d/%d criteria passed; %d unexpected failure(s)", run - failed, run, unexpected));
  if (g_log) std::fclose(g_log);
  return unexpected == 0 ? 0 : 1;
}
