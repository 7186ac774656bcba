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

#include "tabret/encoder.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "tabret/checkpoint.hpp"
#include "tabret/table.hpp"

namespace tabret {

using nlohmann::json;

std::string_view to_string(StructureMode mode) {
  switch (mode) {
    case StructureMode::kNone: return "none";
    case StructureMode::kAuxEmbeddings: return "aux_embeddings";
    case StructureMode::kHardMask: return "hard_mask";
    case StructureMode::kSoftBias: return "soft_bias";
  }
  return "none";
}

StructureMode parse_structure_mode(std::string_view name) {
  if (name == "none") return StructureMode::kNone;
  if (name == "aux_embeddings") return StructureMode::kAuxEmbeddings;
  if (name == "hard_mask") return StructureMode::kHardMask;
  if (name == "soft_bias") return StructureMode::kSoftBias;
  throw std::invalid_argument("unknown structure mode '" + std::string(name) + "'");
}

// ---- config -----------------------------------------------------------------

EncoderConfig EncoderConfig::preset(std::string_view name) {
  EncoderConfig c;
  auto bert = [&](int layers, int heads, int hidden) {
    c.layers = layers;
    c.heads = heads;
    c.hidden = hidden;
    c.ff_dim = 4 * hidden;
    c.max_len = 512;
  };
  if (name == "tiny") return c;
  if (name == "medium") {
    bert(8, 8, 512);
  } else if (name == "base") {
    bert(12, 8, 768);
  } else if (name == "large") {
    bert(24, 16, 1024);
  } else {
    throw std::invalid_argument("unknown size preset '" + std::string(name) + "'");
  }
  return c;
}

void EncoderConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw std::invalid_argument(std::string("encoder config: ") + what + " must be positive");
  };
  positive(layers, "layers");
  positive(heads, "heads");
  positive(hidden, "hidden");
  positive(ff_dim, "ff_dim");
  positive(max_len, "max_len");
  positive(vocab_size, "vocab_size");
  positive(max_rows, "max_rows");
  positive(max_cols, "max_cols");
  positive(max_rank, "max_rank");
  if (hidden % heads != 0) throw std::invalid_argument("encoder config: hidden must be divisible by heads");
  if (max_len < 2) throw std::invalid_argument("encoder config: max_len must be >= 2");
  if (dropout < 0 || dropout >= 1) throw std::invalid_argument("encoder config: dropout must be in [0, 1)");
  if (!(layer_norm_eps > 0)) throw std::invalid_argument("encoder config: layer_norm_eps must be > 0");
}

json EncoderConfig::to_json() const {
  return {{"layers", layers},
          {"heads", heads},
          {"hidden", hidden},
          {"ff_dim", ff_dim},
          {"max_len", max_len},
          {"position_mode", std::string(tabret::to_string(position_mode))},
          {"structure_mode", std::string(tabret::to_string(structure_mode))},
          {"use_rank_embedding", use_rank_embedding},
          {"vocab_size", vocab_size},
          {"max_rows", max_rows},
          {"max_cols", max_cols},
          {"max_rank", max_rank},
          {"dropout", dropout},
          {"init_std", init_std},
          {"layer_norm_eps", layer_norm_eps}};
}

EncoderConfig EncoderConfig::from_json(const json& j) {
  EncoderConfig c;
  if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.hidden = j.value("hidden", c.hidden);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.max_len = j.value("max_len", c.max_len);
  if (j.contains("position_mode")) c.position_mode = parse_position_mode(j.at("position_mode").get<std::string>());
  if (j.contains("structure_mode")) c.structure_mode = parse_structure_mode(j.at("structure_mode").get<std::string>());
  c.use_rank_embedding = j.value("use_rank_embedding", c.use_rank_embedding);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_rows = j.value("max_rows", c.max_rows);
  c.max_cols = j.value("max_cols", c.max_cols);
  c.max_rank = j.value("max_rank", c.max_rank);
  c.dropout = j.value("dropout", c.dropout);
  c.init_std = j.value("init_std", c.init_std);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  return c;
}

EncoderConfig EncoderConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---- structure ----------------------------------------------------------------

Component component_of(int segment, int row, int col) {
  if (segment == 0 || row <= 0 || col <= 0) return Component::kSentence;
  return row == 1 ? Component::kHeader : Component::kCell;
}

Alignment alignment_of(int row_i, int col_i, int row_j, int col_j) {
  if (row_i > 0 && row_i == row_j) return Alignment::kSameRow;
  if (col_i > 0 && col_i == col_j) return Alignment::kSameColumn;
  return Alignment::kOther;
}

namespace {

using TaxonomyTable = std::array<std::array<std::array<int, 3>, 3>, 3>;

TaxonomyTable default_taxonomy() {
  constexpr auto S = static_cast<size_t>(Component::kSentence);
  constexpr auto H = static_cast<size_t>(Component::kHeader);
  constexpr auto C = static_cast<size_t>(Component::kCell);
  constexpr auto R = static_cast<size_t>(Alignment::kSameRow);
  constexpr auto K = static_cast<size_t>(Alignment::kSameColumn);
  constexpr auto O = static_cast<size_t>(Alignment::kOther);
  TaxonomyTable t{};
  auto all = [&](size_t src, size_t dst, int id) { t[src][dst] = {id, id, id}; };
  all(S, S, 1);
  all(S, H, 2);
  all(S, C, 3);
  all(H, S, 4);
  all(H, H, 5);
  t[H][C] = {7, 7, 7};
  t[H][C][K] = 6;
  all(C, S, 8);
  t[C][H] = {10, 10, 10};
  t[C][H][K] = 9;
  t[C][C][R] = 11;
  t[C][C][K] = 12;
  t[C][C][O] = 13;
  return t;
}

}  // namespace

RelationTaxonomy::RelationTaxonomy() : RelationTaxonomy(default_taxonomy()) {}

RelationTaxonomy::RelationTaxonomy(const TaxonomyTable& table) : table_(table) {
  for (const auto& a : table_)
    for (const auto& b : a)
      for (int id : b) {
        if (id < 1) throw std::invalid_argument("relation ids must be >= 1");
        count_ = std::max(count_, id);
      }
}

json RelationTaxonomy::to_json() const { return json(table_); }

RelationTaxonomy RelationTaxonomy::from_json(const json& j) { return RelationTaxonomy(j.get<TaxonomyTable>()); }

std::vector<int> build_relation_matrix(const TokenizedSequence& seq, const RelationTaxonomy& taxonomy) {
  seq.check();
  const size_t n = seq.size();
  std::vector<Component> comp(n);
  for (size_t i = 0; i < n; ++i) comp[i] = component_of(seq.segment_ids[i], seq.row_ids[i], seq.col_ids[i]);
  std::vector<int> rel(n * n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      Alignment a = alignment_of(seq.row_ids[i], seq.col_ids[i], seq.row_ids[j], seq.col_ids[j]);
      rel[i * n + j] = taxonomy.relation(comp[i], comp[j], a);
    }
  return rel;
}

bool hard_mask_visible(const TokenizedSequence& seq, size_t i, size_t j) {
  const int ri = seq.row_ids[i], ci = seq.col_ids[i];
  const int rj = seq.row_ids[j], cj = seq.col_ids[j];
  if (i == j) return true;
  if (ri * ci == 0 || rj * cj == 0) return true;
  return (ri == rj && ri > 0) || (ci == cj && ci > 0);
}

template <typename T>
std::vector<T> build_hard_mask(const TokenizedSequence& seq) {
  seq.check();
  const size_t n = seq.size();
  std::vector<T> mask(n * n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      mask[i * n + j] = hard_mask_visible(seq, i, j) ? T(0) : -std::numeric_limits<T>::infinity();
  return mask;
}

template std::vector<float> build_hard_mask<float>(const TokenizedSequence&);
template std::vector<double> build_hard_mask<double>(const TokenizedSequence&);

// ---- parameters ---------------------------------------------------------------

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> TowerParams<T>::named(const std::string& prefix) {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  auto add = [&](const std::string& name, Tensor<T>& t) {
    if (t.numel() > 0) out.emplace_back(prefix + name, &t);
  };
  add("token_embedding", token);
  add("segment_embedding", segment);
  add("position_embedding", position);
  add("row_embedding", row);
  add("column_embedding", col);
  add("rank_embedding", rank);
  add("embedding_ln.gain", emb_ln_gain);
  add("embedding_ln.bias", emb_ln_bias);
  for (size_t l = 0; l < layers.size(); ++l) {
    auto& L = layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "attention.query.weight", L.wq);
    add(p + "attention.query.bias", L.bq);
    add(p + "attention.key.weight", L.wk);
    add(p + "attention.key.bias", L.bk);
    add(p + "attention.value.weight", L.wv);
    add(p + "attention.value.bias", L.bv);
    add(p + "attention.output.weight", L.wo);
    add(p + "attention.output.bias", L.bo);
    add(p + "attention_ln.gain", L.ln1_gain);
    add(p + "attention_ln.bias", L.ln1_bias);
    add(p + "ffn.in.weight", L.w1);
    add(p + "ffn.in.bias", L.b1);
    add(p + "ffn.out.weight", L.w2);
    add(p + "ffn.out.bias", L.b2);
    add(p + "ffn_ln.gain", L.ln2_gain);
    add(p + "ffn_ln.bias", L.ln2_bias);
  }
  add("relation_bias", relation_bias);
  return out;
}

template <typename T>
BiEncoder<T>::BiEncoder(EncoderConfig config, RelationTaxonomy taxonomy)
    : config_(config), taxonomy_(std::move(taxonomy)) {
  config_.validate();
  allocate(question_);
  allocate(table_);
}

template <typename T>
void BiEncoder<T>::allocate(TowerParams<T>& p) const {
  const auto& c = config_;
  const auto H = static_cast<size_t>(c.hidden);
  const auto F = static_cast<size_t>(c.ff_dim);
  p.token = Tensor<T>({static_cast<size_t>(c.vocab_size), H});
  p.segment = Tensor<T>({2, H});
  p.position = Tensor<T>({static_cast<size_t>(c.max_len), H});
  if (c.structure_mode == StructureMode::kAuxEmbeddings) {
    p.row = Tensor<T>({static_cast<size_t>(c.max_rows) + 1, H});
    p.col = Tensor<T>({static_cast<size_t>(c.max_cols) + 1, H});
  }
  if (c.use_rank_embedding) p.rank = Tensor<T>({static_cast<size_t>(c.max_rank) + 1, H});
  p.emb_ln_gain = Tensor<T>({H}, T(1));
  p.emb_ln_bias = Tensor<T>({H});
  p.layers.clear();
  for (int l = 0; l < c.layers; ++l) {
    LayerParams<T> L;
    L.wq = Tensor<T>({H, H});
    L.wk = Tensor<T>({H, H});
    L.wv = Tensor<T>({H, H});
    L.wo = Tensor<T>({H, H});
    L.bq = Tensor<T>({H});
    L.bk = Tensor<T>({H});
    L.bv = Tensor<T>({H});
    L.bo = Tensor<T>({H});
    L.ln1_gain = Tensor<T>({H}, T(1));
    L.ln1_bias = Tensor<T>({H});
    L.w1 = Tensor<T>({H, F});
    L.b1 = Tensor<T>({F});
    L.w2 = Tensor<T>({F, H});
    L.b2 = Tensor<T>({H});
    L.ln2_gain = Tensor<T>({H}, T(1));
    L.ln2_bias = Tensor<T>({H});
    p.layers.push_back(std::move(L));
  }
  if (c.structure_mode == StructureMode::kSoftBias) {
    p.relation_bias = Tensor<T>({static_cast<size_t>(c.heads), static_cast<size_t>(taxonomy_.count())});
  }
}

template <typename T>
void BiEncoder<T>::initialize(uint64_t seed, bool same_start) {
  auto init_tower = [&](TowerParams<T>& p, uint64_t tower_seed) {
    Rng rng = make_rng(tower_seed, "init");
    std::normal_distribution<double> normal(0.0, config_.init_std);
    auto gaussian = [&](Tensor<T>& t) {
      for (auto& v : t.data) v = static_cast<T>(normal(rng));
    };
    gaussian(p.token);
    gaussian(p.segment);
    gaussian(p.position);
    for (auto& L : p.layers) {
      gaussian(L.wq);
      gaussian(L.wk);
      gaussian(L.wv);
      gaussian(L.wo);
      gaussian(L.w1);
      gaussian(L.w2);
    }
    // Biases, layer-norm parameters, row/column/rank embeddings and relation
    // biases keep their allocation values (zeros, unit gains).
  };
  allocate(question_);
  allocate(table_);
  init_tower(question_, derive_seed(seed, "tower", 0));
  init_tower(table_, derive_seed(seed, "tower", same_start ? 0 : 1));
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> BiEncoder<T>::named_parameters() {
  auto out = question_.named("question.");
  auto t = table_.named("table.");
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

template <typename T>
std::vector<Tensor<T>*> BiEncoder<T>::parameters() {
  std::vector<Tensor<T>*> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

template <typename T>
void BiEncoder<T>::set_requires_grad(bool on) {
  for (Tensor<T>* t : parameters()) {
    t->requires_grad = on;
    if (!on) t->grad.clear();
  }
}

template <typename T>
void BiEncoder<T>::zero_grad() {
  for (Tensor<T>* t : parameters()) t->zero_grad();
}

namespace {

void check_ids(std::span<const int> ids, size_t limit, const char* channel) {
  for (int id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= limit) {
      throw std::out_of_range(std::string(channel) + " id " + std::to_string(id) + " outside [0, " +
                              std::to_string(limit) + ")");
    }
  }
}

}  // namespace

template <typename T>
Var<T> BiEncoder<T>::embed(Tape<T>& tape, const TokenizedSequence& seq, Tower tower, const ForwardOptions& opts) {
  seq.check();
  if (seq.size() == 0) throw ShapeError("embed: empty sequence");
  if (seq.size() > static_cast<size_t>(config_.max_len)) {
    throw ShapeError("embed: sequence of " + std::to_string(seq.size()) + " tokens exceeds max_len");
  }
  TowerParams<T>& p = this->tower(tower);
  check_ids(seq.token_ids, p.token.dim(0), "token");
  check_ids(seq.segment_ids, p.segment.dim(0), "segment");
  check_ids(seq.position_ids, p.position.dim(0), "position");

  Var<T> x = ag::embedding_lookup(tape.param(p.token), std::span<const int>(seq.token_ids));
  x = ag::add(x, ag::embedding_lookup(tape.param(p.segment), std::span<const int>(seq.segment_ids)));
  x = ag::add(x, ag::embedding_lookup(tape.param(p.position), std::span<const int>(seq.position_ids)));
  if (config_.structure_mode == StructureMode::kAuxEmbeddings) {
    check_ids(seq.row_ids, p.row.dim(0), "row");
    check_ids(seq.col_ids, p.col.dim(0), "column");
    x = ag::add(x, ag::embedding_lookup(tape.param(p.row), std::span<const int>(seq.row_ids)));
    x = ag::add(x, ag::embedding_lookup(tape.param(p.col), std::span<const int>(seq.col_ids)));
  }
  if (config_.use_rank_embedding) {
    check_ids(seq.rank_ids, p.rank.dim(0), "rank");
    x = ag::add(x, ag::embedding_lookup(tape.param(p.rank), std::span<const int>(seq.rank_ids)));
  }
  x = ag::layer_norm(x, tape.param(p.emb_ln_gain), tape.param(p.emb_ln_bias), static_cast<T>(config_.layer_norm_eps));
  return ag::dropout(x, static_cast<T>(config_.dropout), opts.training, *opts.rng);
}

template <typename T>
Var<T> BiEncoder<T>::forward(Tape<T>& tape, const TokenizedSequence& seq, Tower tower, const ForwardOptions& opts) {
  if (opts.training && config_.dropout > 0 && opts.rng == nullptr) {
    throw std::invalid_argument("forward: training with dropout needs an rng");
  }
  Rng unused(0);
  ForwardOptions o = opts;
  if (!o.rng) o.rng = &unused;

  TowerParams<T>& p = this->tower(tower);
  Var<T> x = embed(tape, seq, tower, o);
  const size_t L = seq.size();
  const auto H = static_cast<size_t>(config_.hidden);
  const auto heads = static_cast<size_t>(config_.heads);
  const size_t d = H / heads;
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));
  const T eps = static_cast<T>(config_.layer_norm_eps);
  const T drop = static_cast<T>(config_.dropout);

  // Per-head additive attention term, shared by all layers.
  std::vector<std::optional<Var<T>>> terms(heads);
  if (config_.structure_mode == StructureMode::kHardMask) {
    Var<T> mask = tape.constant(Tensor<T>({L, L}, build_hard_mask<T>(seq)));
    for (auto& t : terms) t = mask;
  } else if (config_.structure_mode == StructureMode::kSoftBias) {
    const std::vector<int> rel = build_relation_matrix(seq, taxonomy_);
    Var<T> bias = tape.param(p.relation_bias);
    const auto R = static_cast<uint32_t>(taxonomy_.count());
    for (size_t h = 0; h < heads; ++h) {
      std::vector<uint32_t> idx(L * L);
      for (size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<uint32_t>(h) * R + static_cast<uint32_t>(rel[k] - 1);
      terms[h] = ag::gather(bias, std::span<const uint32_t>(idx), Shape{L, L});
    }
  }
  if (opts.trace) opts.trace->probs.assign(p.layers.size(), {});

  for (size_t l = 0; l < p.layers.size(); ++l) {
    LayerParams<T>& W = p.layers[l];
    Var<T> q = ag::add_bias(ag::matmul(x, tape.param(W.wq)), tape.param(W.bq));
    Var<T> k = ag::add_bias(ag::matmul(x, tape.param(W.wk)), tape.param(W.bk));
    Var<T> v = ag::add_bias(ag::matmul(x, tape.param(W.wv)), tape.param(W.bv));
    std::vector<Var<T>> ctx;
    for (size_t h = 0; h < heads; ++h) {
      Var<T> qh = ag::slice(q, 1, h * d, d);
      Var<T> kh = ag::slice(k, 1, h * d, d);
      Var<T> vh = ag::slice(v, 1, h * d, d);
      Var<T> scores = ag::scale(ag::matmul_nt(qh, kh), inv_sqrt_d);
      Var<T> probs = ag::softmax_masked(scores, terms[h]);
      if (opts.trace) {
        auto pv = probs.value();
        opts.trace->probs[l].emplace_back(pv.begin(), pv.end());
      }
      ctx.push_back(ag::matmul(probs, vh));
    }
    Var<T> attn = ag::concat(std::span<const Var<T>>(ctx), 1);
    attn = ag::add_bias(ag::matmul(attn, tape.param(W.wo)), tape.param(W.bo));
    attn = ag::dropout(attn, drop, o.training, *o.rng);
    x = ag::layer_norm(ag::add(x, attn), tape.param(W.ln1_gain), tape.param(W.ln1_bias), eps);

    Var<T> ff = ag::gelu(ag::add_bias(ag::matmul(x, tape.param(W.w1)), tape.param(W.b1)));
    ff = ag::add_bias(ag::matmul(ff, tape.param(W.w2)), tape.param(W.b2));
    ff = ag::dropout(ff, drop, o.training, *o.rng);
    x = ag::layer_norm(ag::add(x, ff), tape.param(W.ln2_gain), tape.param(W.ln2_bias), eps);
  }
  return ag::slice(x, 0, 0, 1);
}

template <typename T>
std::vector<T> BiEncoder<T>::encode(const TokenizedSequence& seq, Tower tower, AttentionTrace* trace) {
  Tape<T> tape;
  ForwardOptions opts;
  opts.trace = trace;
  Var<T> out = forward(tape, seq, tower, opts);
  auto v = out.value();
  return std::vector<T>(v.begin(), v.end());
}

template <typename T>
void BiEncoder<T>::save(const std::filesystem::path& path) const {
  auto& self = const_cast<BiEncoder<T>&>(*this);
  std::vector<Tensor<float>> converted;
  std::vector<std::string> names;
  for (auto& [name, t] : self.named_parameters()) {
    std::vector<float> data(t->data.begin(), t->data.end());
    converted.emplace_back(t->shape, std::move(data));
    names.push_back(name);
  }
  std::vector<NamedTensorRef> refs;
  for (size_t i = 0; i < names.size(); ++i) refs.push_back({names[i], &converted[i]});
  json meta = {{"kind", "bi-encoder"}, {"config", config_.to_json()}, {"taxonomy", taxonomy_.to_json()}};
  save_checkpoint(path, refs, meta);
}

template <typename T>
BiEncoder<T> BiEncoder<T>::load(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.metadata.value("kind", "") != "bi-encoder") throw DataError(path.string() + ": not a bi-encoder checkpoint");
  BiEncoder<T> model(EncoderConfig::from_json(ck.metadata.at("config")),
                     RelationTaxonomy::from_json(ck.metadata.at("taxonomy")));
  for (auto& [name, t] : model.named_parameters()) {
    const Tensor<float>* src = ck.find(name);
    if (!src) throw DataError(path.string() + ": missing tensor '" + name + "'");
    if (src->shape != t->shape) throw DataError(path.string() + ": shape mismatch for '" + name + "'");
    std::copy(src->data.begin(), src->data.end(), t->data.begin());
  }
  return model;
}

template <typename T>
template <typename U>
void BiEncoder<T>::copy_from(const BiEncoder<U>& other) {
  auto& src_model = const_cast<BiEncoder<U>&>(other);
  auto src = src_model.named_parameters();
  auto dst = named_parameters();
  if (src.size() != dst.size()) throw std::logic_error("copy_from: parameter sets differ");
  for (size_t i = 0; i < dst.size(); ++i) {
    if (src[i].first != dst[i].first || src[i].second->shape != dst[i].second->shape) {
      throw std::logic_error("copy_from: parameter '" + dst[i].first + "' differs");
    }
    std::copy(src[i].second->data.begin(), src[i].second->data.end(), dst[i].second->data.begin());
  }
}

template <typename T>
Var<T> contrastive_batch_loss(Tape<T>& tape, BiEncoder<T>& model, std::span<const TokenizedSequence> questions,
                              std::span<const TokenizedSequence> tables, const ForwardOptions& opts) {
  if (questions.empty()) throw std::invalid_argument("contrastive_batch_loss: empty batch");
  if (tables.size() < questions.size()) {
    throw std::invalid_argument("contrastive_batch_loss: every question needs its positive table");
  }
  std::vector<Var<T>> qv, tv;
  for (const auto& q : questions) qv.push_back(model.forward(tape, q, Tower::kQuestion, opts));
  for (const auto& t : tables) tv.push_back(model.forward(tape, t, Tower::kTable, opts));
  Var<T> qm = ag::concat(std::span<const Var<T>>(qv), 0);
  Var<T> tm = ag::concat(std::span<const Var<T>>(tv), 0);
  return ag::contrastive_nll(ag::matmul_nt(qm, tm));
}

template struct TowerParams<float>;
template struct TowerParams<double>;
template class BiEncoder<float>;
template class BiEncoder<double>;
template void BiEncoder<float>::copy_from<double>(const BiEncoder<double>&);
template void BiEncoder<double>::copy_from<float>(const BiEncoder<float>&);
template void BiEncoder<float>::copy_from<float>(const BiEncoder<float>&);
template Var<float> contrastive_batch_loss(Tape<float>&, BiEncoder<float>&, std::span<const TokenizedSequence>,
                                           std::span<const TokenizedSequence>, const ForwardOptions&);
template Var<double> contrastive_batch_loss(Tape<double>&, BiEncoder<double>&, std::span<const TokenizedSequence>,
                                            std::span<const TokenizedSequence>, const ForwardOptions&);

}  // namespace tabret
