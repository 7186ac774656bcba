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

// Transformer bi-encoder: two independently parameterized towers (question
// and table) with the token/segment/position embedding stack, optional
// row/column/rank embeddings, and three ways of injecting table structure
// into self-attention.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabret/autograd.hpp"
#include "tabret/tokenizer.hpp"

namespace tabret {

enum class StructureMode { kNone, kAuxEmbeddings, kHardMask, kSoftBias };

std::string_view to_string(StructureMode mode);
StructureMode parse_structure_mode(std::string_view name);

struct EncoderConfig {
  int layers = 2;
  int heads = 2;
  int hidden = 64;
  int ff_dim = 128;
  int max_len = 128;
  PositionMode position_mode = PositionMode::kSequential;
  StructureMode structure_mode = StructureMode::kNone;
  bool use_rank_embedding = false;
  int vocab_size = 0;
  int max_rows = 64;  // largest row id (header is row 1)
  int max_cols = 32;
  int max_rank = 64;
  double dropout = 0.0;
  double init_std = 0.06;
  double layer_norm_eps = 1e-12;

  /// "tiny" (desk default), "medium", "base" or "large". ff_dim is 4x hidden
  /// for the named BERT sizes.
  static EncoderConfig preset(std::string_view name);

  /// Throws std::invalid_argument on non-positive sizes or hidden % heads != 0.
  void validate() const;

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  static EncoderConfig load(const std::filesystem::path& path);
};

// ---- structure ------------------------------------------------------------

enum class Component { kSentence = 0, kHeader = 1, kCell = 2 };
enum class Alignment { kSameRow = 0, kSameColumn = 1, kOther = 2 };

/// Component of a token from its provenance channels: anything outside a
/// cell (CLS, title, delimiters, SEP) is sentence, row 1 is header.
Component component_of(int segment, int row, int col);

/// Same row takes precedence over same column; a token is aligned with
/// itself by row.
Alignment alignment_of(int row_i, int col_i, int row_j, int col_j);

/// Maps (source component, target component, alignment) to a relation id in
/// 1..count(). The default is the 13-relation sentence/header/cell scheme:
///    1 S->S   2 S->H   3 S->C   4 H->S   5 H->H
///    6 H->C same column          7 H->C other column
///    8 C->S   9 C->H same column  10 C->H other column
///   11 C->C same row  12 C->C same column  13 C->C otherwise
class RelationTaxonomy {
 public:
  RelationTaxonomy();
  /// table[src][dst][alignment]; throws if an id is outside 1..max.
  explicit RelationTaxonomy(const std::array<std::array<std::array<int, 3>, 3>, 3>& table);

  int relation(Component src, Component dst, Alignment alignment) const {
    return table_[static_cast<size_t>(src)][static_cast<size_t>(dst)][static_cast<size_t>(alignment)];
  }
  int count() const { return count_; }

  nlohmann::json to_json() const;
  static RelationTaxonomy from_json(const nlohmann::json& j);

  bool operator==(const RelationTaxonomy&) const = default;

 private:
  std::array<std::array<std::array<int, 3>, 3>, 3> table_{};
  int count_ = 0;
};

/// Row-major L x L matrix of relation ids.
std::vector<int> build_relation_matrix(const TokenizedSequence& seq, const RelationTaxonomy& taxonomy);

/// Row-major L x L additive mask of 0 / -inf: tokens see each other when
/// they share a row or a column, and tokens outside cells see and are seen
/// by everything.
template <typename T>
std::vector<T> build_hard_mask(const TokenizedSequence& seq);

/// Boolean form of build_hard_mask (true = visible).
bool hard_mask_visible(const TokenizedSequence& seq, size_t i, size_t j);

// ---- parameters -------------------------------------------------------------

template <typename T>
struct LayerParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<T> ln1_gain, ln1_bias;
  Tensor<T> w1, b1, w2, b2;
  Tensor<T> ln2_gain, ln2_bias;
};

template <typename T>
struct TowerParams {
  Tensor<T> token, segment, position;
  Tensor<T> row, col, rank;  // empty unless enabled
  Tensor<T> emb_ln_gain, emb_ln_bias;
  std::vector<LayerParams<T>> layers;
  Tensor<T> relation_bias;  // [heads, relations], soft_bias only; shared by all layers

  std::vector<std::pair<std::string, Tensor<T>*>> named(const std::string& prefix);
};

enum class Tower { kQuestion, kTable };

/// Per-layer, per-head post-softmax attention, filled when requested.
struct AttentionTrace {
  // probs[layer][head] is a row-major L x L matrix.
  std::vector<std::vector<std::vector<double>>> probs;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
  AttentionTrace* trace = nullptr;
};

template <typename T>
class BiEncoder {
 public:
  BiEncoder(EncoderConfig config, RelationTaxonomy taxonomy = {});

  /// Gaussian(0, init_std) weights, zero biases, unit layer-norm gains,
  /// zero row/column/rank embeddings and relation biases. With
  /// `same_start` both towers start from identical values (as when both are
  /// initialized from one pretrained checkpoint); they are still separate
  /// parameter sets.
  void initialize(uint64_t seed, bool same_start = true);

  const EncoderConfig& config() const { return config_; }
  const RelationTaxonomy& taxonomy() const { return taxonomy_; }
  TowerParams<T>& tower(Tower t) { return t == Tower::kQuestion ? question_ : table_; }
  const TowerParams<T>& tower(Tower t) const { return t == Tower::kQuestion ? question_ : table_; }

  /// All parameters, question tower first, with stable names.
  std::vector<std::pair<std::string, Tensor<T>*>> named_parameters();
  std::vector<Tensor<T>*> parameters();
  void set_requires_grad(bool on);
  void zero_grad();

  /// Token/segment/position (+row/column, +rank) embeddings, layer norm,
  /// dropout. Returns [L, hidden]. Throws std::out_of_range on bad ids.
  Var<T> embed(Tape<T>& tape, const TokenizedSequence& seq, Tower tower, const ForwardOptions& opts = {});

  /// Final hidden state at the CLS position, shape [1, hidden].
  Var<T> forward(Tape<T>& tape, const TokenizedSequence& seq, Tower tower, const ForwardOptions& opts = {});

  /// Inference-mode forward on a private tape.
  std::vector<T> encode(const TokenizedSequence& seq, Tower tower, AttentionTrace* trace = nullptr);

  void save(const std::filesystem::path& path) const;
  static BiEncoder load(const std::filesystem::path& path);

  /// Copies parameter values from another precision.
  template <typename U>
  void copy_from(const BiEncoder<U>& other);

 private:
  template <typename U>
  friend class BiEncoder;
  void allocate(TowerParams<T>& p) const;

  EncoderConfig config_;
  RelationTaxonomy taxonomy_;
  TowerParams<T> question_;
  TowerParams<T> table_;
};

/// Contrastive loss of one batch: question i's positive is tables[i]; the
/// remaining tables (hard negatives) are shared columns.
template <typename T>
Var<T> contrastive_batch_loss(Tape<T>& tape, BiEncoder<T>& model, std::span<const TokenizedSequence> questions,
                              std::span<const TokenizedSequence> tables, const ForwardOptions& opts = {});

}  // namespace tabret
