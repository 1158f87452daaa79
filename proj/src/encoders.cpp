// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "molfusion/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace molfusion::enc {

using nn::Tensor;

namespace {

const std::vector<std::string> kSpecialTokens = {"<pad>", "<mask>", "<unk>"};

std::unordered_map<std::string, std::size_t> index_of(const std::vector<std::string>& items) {
  std::unordered_map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!out.emplace(items[i], i).second) throw InvalidConfig("duplicate vocabulary entry: " + items[i]);
  }
  return out;
}

}  // namespace

Vocabulary::Vocabulary()
    : tokens_(kSpecialTokens),
      atom_types_{std::string(kUnknownAtomType)},
      token_index_(index_of(tokens_)),
      atom_type_index_(index_of(atom_types_)) {}

Vocabulary Vocabulary::from_lists(std::vector<std::string> tokens, std::vector<std::string> atom_types) {
  if (tokens.size() < kSpecialTokens.size() ||
      !std::equal(kSpecialTokens.begin(), kSpecialTokens.end(), tokens.begin())) {
    throw InvalidConfig("vocabulary must start with the reserved tokens");
  }
  if (atom_types.empty() || atom_types.back() != kUnknownAtomType) {
    throw InvalidConfig("atom types must end with the unknown class");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.atom_types_ = std::move(atom_types);
  v.token_index_ = index_of(v.tokens_);
  v.atom_type_index_ = index_of(v.atom_types_);
  return v;
}

Vocabulary Vocabulary::build(std::span<const chem::TokenizedSmiles> corpus) {
  std::set<std::string> texts, atoms;
  for (const auto& tok : corpus) {
    for (const auto& t : tok.tokens) {
      texts.insert(t.text);
      if (t.kind == chem::TokenKind::Atom) atoms.insert(t.text);
    }
  }
  Vocabulary v;
  v.tokens_ = kSpecialTokens;
  v.tokens_.insert(v.tokens_.end(), texts.begin(), texts.end());
  v.atom_types_.assign(atoms.begin(), atoms.end());
  v.atom_types_.emplace_back(kUnknownAtomType);
  v.token_index_ = index_of(v.tokens_);
  v.atom_type_index_ = index_of(v.atom_types_);
  return v;
}

std::size_t Vocabulary::token_id(std::string_view text) const {
  const auto it = token_index_.find(std::string(text));
  return it == token_index_.end() ? kUnk : it->second;
}

std::size_t Vocabulary::atom_type(std::string_view atom_token_text) const {
  const auto it = atom_type_index_.find(std::string(atom_token_text));
  return it == atom_type_index_.end() ? atom_types_.size() - 1 : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const chem::TokenizedSmiles& tok) const {
  std::vector<std::size_t> ids;
  ids.reserve(tok.tokens.size());
  for (const auto& t : tok.tokens) ids.push_back(token_id(t.text));
  return ids;
}

std::vector<std::size_t> Vocabulary::atom_type_labels(const chem::TokenizedSmiles& tok) const {
  std::vector<std::size_t> labels(tok.num_atom_tokens());
  for (std::size_t k = 0; k < tok.num_atom_tokens(); ++k) {
    labels[tok.atom_map[k]] = atom_type(tok.tokens[tok.atom_token_index[k]].text);
  }
  return labels;
}

void EncoderConfig::validate() const {
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || mp_rounds == 0) {
    throw InvalidConfig("encoder dimensions and counts must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw InvalidConfig("d_model (" + std::to_string(d_model) + ") is not divisible by n_heads (" +
                        std::to_string(n_heads) + ")");
  }
  if (vocab_size <= Vocabulary::kUnk) throw InvalidConfig("vocab_size must cover the reserved tokens");
}

MaskingOutcome mask_atoms(const chem::TokenizedSmiles& tok, const Vocabulary& vocab, double mask_rate,
                          Rng& rng) {
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) throw std::invalid_argument("mask_rate outside [0, 1]");
  const std::size_t n = tok.num_atom_tokens();
  MaskingOutcome out;
  out.masked_token_ids = vocab.encode(tok);
  out.atom_type_labels = vocab.atom_type_labels(tok);
  out.mask_indicator.assign(n, 0);

  std::size_t count = 0;
  if (mask_rate > 0.0 && n > 0) {
    count = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(mask_rate * static_cast<double>(n))));
    count = std::min(count, n);
  }
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + rng.uniform_index(n - i)]);
  }
  out.masked_atoms.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.masked_atoms.begin(), out.masked_atoms.end());

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t atom = tok.atom_map[k];
    if (std::binary_search(out.masked_atoms.begin(), out.masked_atoms.end(), atom)) {
      out.mask_indicator[atom] = 1;
      out.masked_token_ids[tok.atom_token_index[k]] = Vocabulary::kMask;
    }
  }
  return out;
}

Tensor positional_encoding(std::size_t n_positions, std::size_t width) {
  std::vector<double> pe(n_positions * width);
  for (std::size_t pos = 0; pos < n_positions; ++pos) {
    for (std::size_t i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) * freq;
      pe[pos * width + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from_values(n_positions, width, std::move(pe));
}

SmilesEncoder::SmilesEncoder(nn::ParameterStore& store, const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  embedding_ = store.add_xavier("smiles.embedding", cfg.vocab_size, d, rng);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "smiles.layer" + std::to_string(l) + ".";
    Layer layer;
    layer.wq = store.add_xavier(p + "wq", d, d, rng);
    layer.bq = store.add_constant(p + "bq", 1, d, 0.0);
    layer.wk = store.add_xavier(p + "wk", d, d, rng);
    layer.bk = store.add_constant(p + "bk", 1, d, 0.0);
    layer.wv = store.add_xavier(p + "wv", d, d, rng);
    layer.bv = store.add_constant(p + "bv", 1, d, 0.0);
    layer.wo = store.add_xavier(p + "wo", d, d, rng);
    layer.bo = store.add_constant(p + "bo", 1, d, 0.0);
    layer.ln1_gain = store.add_constant(p + "ln1.gain", 1, d, 1.0);
    layer.ln1_bias = store.add_constant(p + "ln1.bias", 1, d, 0.0);
    layer.ff1_w = store.add_xavier(p + "ff1.w", d, 2 * d, rng);
    layer.ff1_b = store.add_constant(p + "ff1.b", 1, 2 * d, 0.0);
    layer.ff2_w = store.add_xavier(p + "ff2.w", 2 * d, d, rng);
    layer.ff2_b = store.add_constant(p + "ff2.b", 1, d, 0.0);
    layer.ln2_gain = store.add_constant(p + "ln2.gain", 1, d, 1.0);
    layer.ln2_bias = store.add_constant(p + "ln2.bias", 1, d, 0.0);
    layers_.push_back(std::move(layer));
  }
}

Tensor SmilesEncoder::attention(const Layer& layer, const Tensor& x) const {
  const std::size_t dh = cfg_.d_model / cfg_.n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor q = nn::linear(x, layer.wq, layer.bq);
  const Tensor k = nn::linear(x, layer.wk, layer.bk);
  const Tensor v = nn::linear(x, layer.wv, layer.bv);
  std::vector<Tensor> heads;
  heads.reserve(cfg_.n_heads);
  for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
    const Tensor qh = nn::slice_cols(q, h * dh, dh);
    const Tensor kh = nn::slice_cols(k, h * dh, dh);
    const Tensor vh = nn::slice_cols(v, h * dh, dh);
    const Tensor weights = nn::softmax_rows(nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt));
    heads.push_back(nn::matmul(weights, vh));
  }
  return nn::linear(nn::concat_cols(heads), layer.wo, layer.bo);
}

AtomEmbeddingSequence SmilesEncoder::encode(std::span<const std::size_t> token_ids,
                                            const chem::TokenizedSmiles& tok) const {
  if (token_ids.size() != tok.tokens.size()) {
    throw nn::ShapeMismatch("token id count does not match the tokenization");
  }
  if (tok.num_atom_tokens() == 0) throw std::invalid_argument("cannot encode a SMILES without atoms");
  for (std::size_t id : token_ids) {
    if (id >= cfg_.vocab_size) {
      throw VocabOverflow("token id " + std::to_string(id) + " >= vocab_size " + std::to_string(cfg_.vocab_size));
    }
  }
  Tensor x = nn::add(nn::gather_rows(embedding_, token_ids), positional_encoding(token_ids.size(), cfg_.d_model));
  for (const auto& layer : layers_) {
    x = nn::layer_norm_rows(nn::add(x, attention(layer, x)), layer.ln1_gain, layer.ln1_bias);
    const Tensor ff = nn::linear(nn::tanh(nn::linear(x, layer.ff1_w, layer.ff1_b)), layer.ff2_w, layer.ff2_b);
    x = nn::layer_norm_rows(nn::add(x, ff), layer.ln2_gain, layer.ln2_bias);
  }
  std::vector<std::size_t> rows(tok.num_atom_tokens());
  for (std::size_t k = 0; k < tok.num_atom_tokens(); ++k) rows[tok.atom_map[k]] = tok.atom_token_index[k];
  AtomEmbeddingSequence out;
  out.per_atom = nn::gather_rows(x, rows);
  out.pooled = nn::mean_rows(out.per_atom);
  return out;
}

GraphEncoder::GraphEncoder(nn::ParameterStore& store, const EncoderConfig& cfg, Rng& rng)
    : width_(cfg.graph_width()) {
  cfg.validate();
  const std::size_t d = width_;
  init_w_ = store.add_xavier("graph.init.w", chem::kAtomFeatureDim, d, rng);
  init_b_ = store.add_constant("graph.init.b", 1, d, 0.0);
  for (std::size_t r = 0; r < cfg.mp_rounds; ++r) {
    const std::string p = "graph.round" + std::to_string(r) + ".";
    Round round;
    round.msg_w = store.add_xavier(p + "msg.w", d + chem::kBondFeatureDim, d, rng);
    round.msg_b = store.add_constant(p + "msg.b", 1, d, 0.0);
    round.upd_w = store.add_xavier(p + "upd.w", 2 * d, d, rng);
    round.upd_b = store.add_constant(p + "upd.b", 1, d, 0.0);
    rounds_.push_back(std::move(round));
  }
}

AtomEmbeddingSequence GraphEncoder::encode(const chem::Molecule& mol, const chem::AtomFeatures& feats) const {
  const std::size_t n = mol.num_atoms();
  if (n == 0) throw std::invalid_argument("cannot encode an empty molecule");
  if (feats.num_atoms != n || feats.atom.size() != n * chem::kAtomFeatureDim ||
      feats.bond.size() != mol.num_bonds() * chem::kBondFeatureDim) {
    throw nn::ShapeMismatch("atom features do not match the molecule");
  }
  std::vector<std::size_t> src, dst;
  std::vector<double> edge_feats;
  for (std::size_t b = 0; b < mol.num_bonds(); ++b) {
    const auto& bond = mol.bonds[b];
    const auto* f = feats.bond.data() + b * chem::kBondFeatureDim;
    for (const auto& [from, to] : {std::pair{bond.begin, bond.end}, std::pair{bond.end, bond.begin}}) {
      src.push_back(from);
      dst.push_back(to);
      edge_feats.insert(edge_feats.end(), f, f + chem::kBondFeatureDim);
    }
  }
  const Tensor edges = Tensor::from_values(src.size(), chem::kBondFeatureDim, std::move(edge_feats));

  Tensor h = nn::linear(Tensor::from_values(n, chem::kAtomFeatureDim, feats.atom), init_w_, init_b_);
  for (const auto& round : rounds_) {
    Tensor aggregate = Tensor::zeros(n, width_);
    if (!src.empty()) {
      const std::vector<Tensor> parts{nn::gather_rows(h, src), edges};
      const Tensor messages = nn::linear(nn::concat_cols(parts), round.msg_w, round.msg_b);
      aggregate = nn::scatter_add_rows(messages, dst, n);
    }
    const std::vector<Tensor> state{h, aggregate};
    h = nn::tanh(nn::linear(nn::concat_cols(state), round.upd_w, round.upd_b));
  }
  AtomEmbeddingSequence out;
  out.per_atom = h;
  out.pooled = nn::mean_rows(h);
  return out;
}

Projection Projection::create(nn::ParameterStore& store, const std::string& prefix, std::size_t in,
                              std::size_t out, Rng& rng, double gain) {
  Projection p;
  p.weight = store.add_xavier(prefix + ".w", in, out, rng);
  for (double& w : p.weight.mutable_values()) w *= gain;
  p.bias = store.add_constant(prefix + ".b", 1, out, 0.0);
  return p;
}

}  // namespace molfusion::enc
