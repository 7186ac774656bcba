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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabret/encoder.hpp"
#include "tabret/linearizer.hpp"
#include "tabret/table.hpp"
#include "tabret/tokenizer.hpp"

namespace tabret {

struct TrainingConfig {
  int batch_size = 16;
  double learning_rate = 1e-3;
  int epochs = 20;
  int hard_negatives_per_question = 1;
  int mining_top_n = 100;
  int remine_every = 2;  // epochs between re-mining; 0 mines once before training
  double warmup_fraction = 0.0;  // linear warmup over this share of the steps
  bool linear_decay = false;     // decay linearly after warmup
  double max_grad_norm = 0.0;    // 0 disables clipping
  uint64_t seed = 13;

  /// Throws std::invalid_argument; batch_size must be >= 2.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

/// Row-major [N, dim] table embeddings with a parallel id list.
struct DenseIndex {
  size_t dim = 0;
  std::vector<float> matrix;
  std::vector<std::string> ids;

  size_t size() const { return ids.size(); }
  std::span<const float> row(size_t i) const { return {matrix.data() + i * dim, dim}; }
  /// Throws DataError on a row/id count mismatch or a non-finite entry.
  void validate() const;

  /// Writes `path` (checkpoint format) and `path` + ".ids.json".
  void save(const std::filesystem::path& path) const;
  static DenseIndex load(const std::filesystem::path& path);
};

/// Dot product accumulated in double. Throws std::invalid_argument on a
/// dimension mismatch.
double similarity(std::span<const float> a, std::span<const float> b);
double similarity(std::span<const double> a, std::span<const double> b);

struct Hit {
  std::string id;
  double score = 0;
  bool operator==(const Hit&) const = default;
};

/// Table tower embeddings of every corpus table, in corpus order.
DenseIndex build_index(BiEncoder<float>& model, const Corpus& corpus, const Vocab& vocab,
                       const LinearizationOptions& options);

/// Top k by score, descending, ties by ascending id. Throws
/// std::out_of_range unless 1 <= k <= N.
std::vector<Hit> retrieve(const DenseIndex& index, std::span<const float> query, size_t k);

std::vector<float> encode_question_vector(BiEncoder<float>& model, const Vocab& vocab, std::string_view text);

/// For each question: the highest-ranked tables among the top_n that
/// contain none of its answers, at most `per_question` of them.
std::vector<std::vector<std::string>> mine_hard_negatives(BiEncoder<float>& model, std::span<const Question> questions,
                                                          const Corpus& corpus, const Vocab& vocab,
                                                          const LinearizationOptions& options, int top_n,
                                                          int per_question);
/// Same, against a prebuilt index and precomputed question vectors.
std::vector<std::vector<std::string>> mine_hard_negatives(const DenseIndex& index,
                                                          std::span<const std::vector<float>> question_vectors,
                                                          std::span<const Question> questions, const Corpus& corpus,
                                                          int top_n, int per_question);

struct TrainResult {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  double first_step_loss = 0;
  int steps = 0;
  bool diverged = false;
};

/// Batch groups for one epoch: question indices, no two sharing a positive
/// table. Questions whose positive collides are deferred to a later batch.
std::vector<std::vector<size_t>> make_batches(std::span<const Question> questions, std::span<const size_t> order,
                                              int batch_size);

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Contrastive fine-tuning with in-batch and hard negatives (Adam).
/// Deterministic given cfg.seed. Stops early with `diverged` set when a
/// batch loss is not finite.
TrainResult train(BiEncoder<float>& model, std::span<const Question> questions, const Corpus& corpus,
                  const Vocab& vocab, const TrainingConfig& cfg, const LinearizationOptions& options,
                  const EpochCallback& on_epoch = {});

inline constexpr int kDefaultKs[] = {1, 5, 10, 20, 50};

struct EvalReport {
  std::vector<int> ks;
  std::vector<double> accuracy;  // parallel to ks
  size_t question_count = 0;
  std::string fingerprint;

  double at(int k) const;
  /// Throws std::logic_error if an accuracy is outside [0,1] or decreases in k.
  void check() const;
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  /// Two-row markdown table, columns @k, values in percent.
  std::string to_markdown(const std::string& label = "model") const;
};

/// Fraction of questions with an answer-containing table among the top k.
/// k larger than the corpus is clamped. Throws std::invalid_argument on an
/// empty question set.
EvalReport evaluate(const DenseIndex& index, BiEncoder<float>& model, const Vocab& vocab,
                    std::span<const Question> questions, const Corpus& corpus,
                    std::span<const int> ks = kDefaultKs);
EvalReport evaluate(const DenseIndex& index, std::span<const std::vector<float>> question_vectors,
                    std::span<const Question> questions, const Corpus& corpus, std::span<const int> ks = kDefaultKs);

}  // namespace tabret
