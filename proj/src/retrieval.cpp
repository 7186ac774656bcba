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

#include "tabret/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "tabret/checkpoint.hpp"
#include "tabret/kernels.hpp"
#include "tabret/optim.hpp"

namespace tabret {

using nlohmann::json;

void TrainingConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("training config: batch_size must be >= 2");
  if (!(learning_rate > 0)) throw std::invalid_argument("training config: learning_rate must be > 0");
  if (epochs < 0) throw std::invalid_argument("training config: epochs must be >= 0");
  if (hard_negatives_per_question < 0) throw std::invalid_argument("training config: negative hard_negatives");
  if (mining_top_n < 1) throw std::invalid_argument("training config: mining_top_n must be >= 1");
  if (remine_every < 0) throw std::invalid_argument("training config: remine_every must be >= 0");
  if (!(warmup_fraction >= 0 && warmup_fraction <= 1)) {
    throw std::invalid_argument("training config: warmup_fraction outside [0,1]");
  }
  if (max_grad_norm < 0) throw std::invalid_argument("training config: max_grad_norm must be >= 0");
}

json TrainingConfig::to_json() const {
  return {{"batch_size", batch_size},     {"learning_rate", learning_rate},
          {"epochs", epochs},             {"hard_negatives_per_question", hard_negatives_per_question},
          {"mining_top_n", mining_top_n}, {"remine_every", remine_every},
          {"seed", seed},
          {"warmup_fraction", warmup_fraction},
          {"linear_decay", linear_decay},
          {"max_grad_norm", max_grad_norm}};
}

TrainingConfig TrainingConfig::from_json(const json& j) {
  TrainingConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.hard_negatives_per_question = j.value("hard_negatives_per_question", c.hard_negatives_per_question);
  c.mining_top_n = j.value("mining_top_n", c.mining_top_n);
  c.remine_every = j.value("remine_every", c.remine_every);
  c.seed = j.value("seed", c.seed);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.linear_decay = j.value("linear_decay", c.linear_decay);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  return c;
}

// ---- index ------------------------------------------------------------------

void DenseIndex::validate() const {
  if (matrix.size() != ids.size() * dim) {
    throw DataError("index has " + std::to_string(ids.size()) + " ids but " + std::to_string(matrix.size()) +
                    " values for dim " + std::to_string(dim));
  }
  for (float v : matrix) {
    if (!std::isfinite(v)) throw DataError("index holds a non-finite embedding");
  }
}

void DenseIndex::save(const std::filesystem::path& path) const {
  validate();
  Tensor<float> m({ids.size(), dim}, matrix);
  NamedTensorRef ref{"embeddings", &m};
  save_checkpoint(path, std::span<const NamedTensorRef>(&ref, 1), {{"kind", "dense-index"}});
  std::ofstream out(path.string() + ".ids.json");
  if (!out) throw DataError("cannot write " + path.string() + ".ids.json");
  out << json(ids).dump() << '\n';
}

DenseIndex DenseIndex::load(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  const Tensor<float>* m = ck.find("embeddings");
  if (!m || m->rank() != 2) throw DataError(path.string() + ": no [N, dim] 'embeddings' tensor");
  std::ifstream in(path.string() + ".ids.json");
  if (!in) throw DataError("cannot open " + path.string() + ".ids.json");
  DenseIndex index;
  try {
    index.ids = json::parse(in).get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ".ids.json: " + e.what());
  }
  index.dim = m->dim(1);
  index.matrix = m->data;
  index.validate();
  return index;
}

double similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw std::invalid_argument("similarity: dimension mismatch");
  return kernels::dot_wide(a.data(), b.data(), a.size());
}

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("similarity: dimension mismatch");
  return kernels::table_f64().dot(a.data(), b.data(), a.size());
}

namespace {

int max_len_of(const BiEncoder<float>& model) { return model.config().max_len; }

TokenizedSequence table_sequence(const BiEncoder<float>& model, const Table& t, const Vocab& vocab,
                                 const LinearizationOptions& options) {
  return encode_table(t, options, vocab, model.config().position_mode, max_len_of(model));
}

std::vector<Hit> rank(const DenseIndex& index, std::span<const float> query, size_t k) {
  if (query.size() != index.dim) throw std::invalid_argument("retrieve: query dimension mismatch");
  const size_t n = index.size();
  std::vector<double> scores(n);
  for (size_t i = 0; i < n; ++i) scores[i] = kernels::dot_wide(query.data(), index.row(i).data(), index.dim);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  auto better = [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index.ids[a] < index.ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  std::vector<Hit> out;
  out.reserve(k);
  for (size_t i = 0; i < k; ++i) out.push_back({index.ids[order[i]], scores[order[i]]});
  return out;
}

}  // namespace

DenseIndex build_index(BiEncoder<float>& model, const Corpus& corpus, const Vocab& vocab,
                       const LinearizationOptions& options) {
  DenseIndex index;
  index.dim = static_cast<size_t>(model.config().hidden);
  index.matrix.reserve(corpus.size() * index.dim);
  for (const Table& t : corpus) {
    std::vector<float> v = model.encode(table_sequence(model, t, vocab, options), Tower::kTable);
    index.matrix.insert(index.matrix.end(), v.begin(), v.end());
    index.ids.push_back(t.id);
  }
  index.validate();
  return index;
}

std::vector<Hit> retrieve(const DenseIndex& index, std::span<const float> query, size_t k) {
  if (k < 1 || k > index.size()) {
    throw std::out_of_range("retrieve: k=" + std::to_string(k) + " outside [1, " + std::to_string(index.size()) +
                            "]");
  }
  return rank(index, query, k);
}

std::vector<float> encode_question_vector(BiEncoder<float>& model, const Vocab& vocab, std::string_view text) {
  return model.encode(encode_question(text, vocab, max_len_of(model)), Tower::kQuestion);
}

// ---- hard negatives -----------------------------------------------------------

std::vector<std::vector<std::string>> mine_hard_negatives(const DenseIndex& index,
                                                          std::span<const std::vector<float>> question_vectors,
                                                          std::span<const Question> questions, const Corpus& corpus,
                                                          int top_n, int per_question) {
  if (question_vectors.size() != questions.size()) throw std::invalid_argument("mine: vector/question count mismatch");
  std::vector<std::vector<std::string>> out(questions.size());
  if (per_question <= 0 || index.size() == 0) return out;
  const size_t k = std::min(static_cast<size_t>(std::max(top_n, 1)), index.size());
  for (size_t q = 0; q < questions.size(); ++q) {
    for (const Hit& h : rank(index, question_vectors[q], k)) {
      if (contains_answer(corpus.at(h.id), questions[q].answers)) continue;
      out[q].push_back(h.id);
      if (out[q].size() == static_cast<size_t>(per_question)) break;
    }
  }
  return out;
}

std::vector<std::vector<std::string>> mine_hard_negatives(BiEncoder<float>& model, std::span<const Question> questions,
                                                          const Corpus& corpus, const Vocab& vocab,
                                                          const LinearizationOptions& options, int top_n,
                                                          int per_question) {
  if (per_question <= 0) return std::vector<std::vector<std::string>>(questions.size());
  DenseIndex index = build_index(model, corpus, vocab, options);
  std::vector<std::vector<float>> qv;
  qv.reserve(questions.size());
  for (const Question& q : questions) qv.push_back(encode_question_vector(model, vocab, q.text));
  return mine_hard_negatives(index, qv, questions, corpus, top_n, per_question);
}

// ---- training -----------------------------------------------------------------

std::vector<std::vector<size_t>> make_batches(std::span<const Question> questions, std::span<const size_t> order,
                                              int batch_size) {
  std::vector<std::vector<size_t>> batches;
  std::vector<size_t> pending(order.begin(), order.end());
  while (!pending.empty()) {
    std::vector<size_t> batch, rest;
    std::set<std::string_view> positives;
    for (size_t q : pending) {
      const std::string& pos = questions[q].positive_table_id;
      if (batch.size() < static_cast<size_t>(batch_size) && !positives.contains(pos)) {
        positives.insert(pos);
        batch.push_back(q);
      } else {
        rest.push_back(q);
      }
    }
    batches.push_back(std::move(batch));
    pending = std::move(rest);
  }
  return batches;
}

TrainResult train(BiEncoder<float>& model, std::span<const Question> questions, const Corpus& corpus,
                  const Vocab& vocab, const TrainingConfig& cfg, const LinearizationOptions& options,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  options.validate();
  if (questions.empty()) throw std::invalid_argument("train: no questions");
  for (const Question& q : questions) {
    if (!corpus.contains(q.positive_table_id)) {
      throw DataError("question '" + q.id + "' has no positive table in the corpus");
    }
  }

  std::unordered_map<std::string, TokenizedSequence> table_seqs;
  for (const Table& t : corpus) table_seqs.emplace(t.id, table_sequence(model, t, vocab, options));
  std::vector<TokenizedSequence> question_seqs;
  for (const Question& q : questions) question_seqs.push_back(encode_question(q.text, vocab, max_len_of(model)));

  auto mine = [&] {
    return mine_hard_negatives(model, questions, corpus, vocab, options, cfg.mining_top_n,
                               cfg.hard_negatives_per_question);
  };
  std::vector<std::vector<std::string>> negatives = mine();

  model.set_requires_grad(true);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  Adam<float> adam(model.parameters(), adam_cfg);
  adam.zero_grad();

  const std::vector<Tensor<float>*> params = model.parameters();
  const double batches_per_epoch =
      std::ceil(static_cast<double>(questions.size()) / static_cast<double>(cfg.batch_size));
  const double total_steps = std::max(1.0, batches_per_epoch * cfg.epochs);
  const double warmup_steps = cfg.warmup_fraction * total_steps;
  auto lr_at = [&](int step) {
    const double s = step + 1.0;
    if (s <= warmup_steps) return cfg.learning_rate * s / warmup_steps;
    if (!cfg.linear_decay) return cfg.learning_rate;
    // Deferred batches can push the step count past the estimate; hold the
    // final rate from there on.
    const double rest = std::max(1.0, total_steps - warmup_steps);
    const double progress = std::clamp((s - warmup_steps - 1.0) / rest, 0.0, 1.0);
    return cfg.learning_rate * std::max(1.0 - progress, 1.0 / rest);
  };

  TrainResult result;
  std::vector<size_t> order(questions.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (int epoch = 0; epoch < cfg.epochs && !result.diverged; ++epoch) {
    Rng order_rng = make_rng(cfg.seed, "epoch", static_cast<uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0;
    int batches = 0;
    for (const auto& batch : make_batches(questions, order, cfg.batch_size)) {
      std::vector<TokenizedSequence> qs, ts;
      std::set<std::string> columns;
      for (size_t q : batch) {
        qs.push_back(question_seqs[q]);
        ts.push_back(table_seqs.at(questions[q].positive_table_id));
        columns.insert(questions[q].positive_table_id);
      }
      for (size_t q : batch) {
        for (const std::string& id : negatives[q]) {
          if (columns.insert(id).second) ts.push_back(table_seqs.at(id));
        }
      }
      Rng dropout_rng = make_rng(cfg.seed, "dropout", static_cast<uint64_t>(result.steps));
      ForwardOptions fo;
      fo.training = true;
      fo.rng = &dropout_rng;
      Tape<float> tape;
      Var<float> loss = contrastive_batch_loss<float>(tape, model, qs, ts, fo);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        result.diverged = true;
        break;
      }
      tape.backward(loss);
      if (cfg.max_grad_norm > 0) clip_grad_norm<float>(params, cfg.max_grad_norm);
      adam.set_learning_rate(lr_at(result.steps));
      adam.step();
      adam.zero_grad();
      if (result.steps == 0) result.first_step_loss = value;
      ++result.steps;
      total += value;
      ++batches;
    }
    if (result.diverged) break;
    result.epoch_loss.push_back(batches ? total / batches : 0.0);
    if (on_epoch) on_epoch(epoch, result.epoch_loss.back());
    if (cfg.remine_every > 0 && (epoch + 1) % cfg.remine_every == 0 && epoch + 1 < cfg.epochs) negatives = mine();
  }
  model.set_requires_grad(false);
  return result;
}

// ---- evaluation ---------------------------------------------------------------

double EvalReport::at(int k) const {
  for (size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return accuracy[i];
  throw std::out_of_range("report has no accuracy@" + std::to_string(k));
}

void EvalReport::check() const {
  if (ks.size() != accuracy.size()) throw std::logic_error("report: ks/accuracy length mismatch");
  for (size_t i = 0; i < accuracy.size(); ++i) {
    if (!(accuracy[i] >= 0 && accuracy[i] <= 1)) throw std::logic_error("report: accuracy outside [0,1]");
    if (i > 0 && ks[i] > ks[i - 1] && accuracy[i] < accuracy[i - 1]) {
      throw std::logic_error("report: accuracy decreases with k");
    }
  }
}

json EvalReport::to_json() const {
  json acc = json::object();
  for (size_t i = 0; i < ks.size(); ++i) acc["@" + std::to_string(ks[i])] = accuracy[i];
  return {{"ks", ks}, {"accuracy", acc}, {"question_count", question_count}, {"fingerprint", fingerprint}};
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  r.ks = j.at("ks").get<std::vector<int>>();
  for (int k : r.ks) r.accuracy.push_back(j.at("accuracy").at("@" + std::to_string(k)).get<double>());
  r.question_count = j.value("question_count", size_t{0});
  r.fingerprint = j.value("fingerprint", "");
  return r;
}

std::string EvalReport::to_markdown(const std::string& label) const {
  std::string head = "| Model |", rule = "|---|", row = "| " + label + " |";
  char buf[32];
  for (size_t i = 0; i < ks.size(); ++i) {
    head += " @" + std::to_string(ks[i]) + " |";
    rule += "---:|";
    std::snprintf(buf, sizeof buf, " %.2f |", 100.0 * accuracy[i]);
    row += buf;
  }
  return head + "\n" + rule + "\n" + row + "\n";
}

EvalReport evaluate(const DenseIndex& index, std::span<const std::vector<float>> question_vectors,
                    std::span<const Question> questions, const Corpus& corpus, std::span<const int> ks) {
  if (questions.empty()) throw std::invalid_argument("evaluate: empty question set");
  if (question_vectors.size() != questions.size()) throw std::invalid_argument("evaluate: vector count mismatch");
  if (ks.empty()) throw std::invalid_argument("evaluate: no cutoffs");
  for (int k : ks) {
    if (k < 1) throw std::invalid_argument("evaluate: cutoffs must be >= 1");
  }
  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  std::sort(report.ks.begin(), report.ks.end());
  const size_t kmax = std::min(static_cast<size_t>(report.ks.back()), index.size());
  std::vector<size_t> hits(report.ks.size(), 0);
  for (size_t q = 0; q < questions.size(); ++q) {
    const auto ranked = rank(index, question_vectors[q], kmax);
    size_t first = ranked.size();
    for (size_t r = 0; r < ranked.size(); ++r) {
      if (contains_answer(corpus.at(ranked[r].id), questions[q].answers)) {
        first = r;
        break;
      }
    }
    for (size_t i = 0; i < report.ks.size(); ++i) {
      if (first < static_cast<size_t>(report.ks[i])) ++hits[i];
    }
  }
  for (size_t h : hits) report.accuracy.push_back(static_cast<double>(h) / static_cast<double>(questions.size()));
  report.question_count = questions.size();
  report.check();
  return report;
}

EvalReport evaluate(const DenseIndex& index, BiEncoder<float>& model, const Vocab& vocab,
                    std::span<const Question> questions, const Corpus& corpus, std::span<const int> ks) {
  std::vector<std::vector<float>> qv;
  qv.reserve(questions.size());
  for (const Question& q : questions) qv.push_back(encode_question_vector(model, vocab, q.text));
  EvalReport r = evaluate(index, qv, questions, corpus, ks);
  json fp = {{"encoder", model.config().to_json()}, {"index_rows", index.size()}, {"questions", questions.size()}};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_tag(fp.dump())));
  r.fingerprint = buf;
  return r;
}

}  // namespace tabret
