// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "molfusion/chemcore.hpp"
#include "molfusion/parameters.hpp"
#include "molfusion/random.hpp"
#include "molfusion/tensor.hpp"

namespace molfusion::enc {

class VocabOverflow : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Token vocabulary for the sequence encoder plus the atom-type classes used
// as masked-prediction labels. Ids 0..2 are reserved for PAD, MASK and UNK;
// the last atom type collects atom tokens that were not seen when building.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kMask = 1;
  static constexpr std::size_t kUnk = 2;
  static constexpr std::string_view kUnknownAtomType = "<unk>";

  Vocabulary();
  static Vocabulary build(std::span<const chem::TokenizedSmiles> corpus);
  // Reconstructs a vocabulary from the lists returned by tokens() and
  // atom_types(); used when loading checkpoints.
  static Vocabulary from_lists(std::vector<std::string> tokens, std::vector<std::string> atom_types);

  std::size_t size() const { return tokens_.size(); }
  std::size_t atom_type_count() const { return atom_types_.size(); }
  std::size_t token_id(std::string_view text) const;
  std::size_t atom_type(std::string_view atom_token_text) const;
  std::vector<std::size_t> encode(const chem::TokenizedSmiles& tok) const;
  std::vector<std::size_t> atom_type_labels(const chem::TokenizedSmiles& tok) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& atom_types() const { return atom_types_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.atom_types_ == b.atom_types_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> atom_types_;
  std::unordered_map<std::string, std::size_t> token_index_;
  std::unordered_map<std::string, std::size_t> atom_type_index_;
};

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t mp_rounds = 3;
  std::size_t vocab_size = 0;
  // Width of the graph encoder; 0 means d_model. Only diagnostic configs set
  // this, since atom-level fusion needs both encoders at the same width.
  std::size_t graph_d_model = 0;

  std::size_t graph_width() const { return graph_d_model == 0 ? d_model : graph_d_model; }
  void validate() const;
};

struct AtomEmbeddingSequence {
  nn::Tensor per_atom;  // n_atoms x width, rows in molecule atom order
  nn::Tensor pooled;    // 1 x width
};

struct MaskingOutcome {
  std::vector<std::size_t> masked_token_ids;
  std::vector<std::uint8_t> mask_indicator;      // per atom
  std::vector<std::size_t> masked_atoms;         // sorted atom indices
  std::vector<std::size_t> atom_type_labels;     // per atom

  std::size_t num_masked() const { return masked_atoms.size(); }
};

MaskingOutcome mask_atoms(const chem::TokenizedSmiles& tok, const Vocabulary& vocab, double mask_rate,
                          Rng& rng);

// Fixed sinusoidal position signal, n_positions x width.
nn::Tensor positional_encoding(std::size_t n_positions, std::size_t width);

class SmilesEncoder {
 public:
  SmilesEncoder() = default;
  SmilesEncoder(nn::ParameterStore& store, const EncoderConfig& cfg, Rng& rng);

  AtomEmbeddingSequence encode(std::span<const std::size_t> token_ids,
                               const chem::TokenizedSmiles& tok) const;

 private:
  struct Layer {
    nn::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    nn::Tensor ln1_gain, ln1_bias;
    nn::Tensor ff1_w, ff1_b, ff2_w, ff2_b;
    nn::Tensor ln2_gain, ln2_bias;
  };

  nn::Tensor attention(const Layer& layer, const nn::Tensor& x) const;

  EncoderConfig cfg_;
  nn::Tensor embedding_;
  std::vector<Layer> layers_;
};

class GraphEncoder {
 public:
  GraphEncoder() = default;
  GraphEncoder(nn::ParameterStore& store, const EncoderConfig& cfg, Rng& rng);

  AtomEmbeddingSequence encode(const chem::Molecule& mol, const chem::AtomFeatures& feats) const;

 private:
  struct Round {
    nn::Tensor msg_w, msg_b, upd_w, upd_b;
  };

  std::size_t width_ = 0;
  nn::Tensor init_w_, init_b_;
  std::vector<Round> rounds_;
};

struct Projection {
  nn::Tensor weight;  // in x out
  nn::Tensor bias;    // 1 x out

  static Projection create(nn::ParameterStore& store, const std::string& prefix, std::size_t in,
                           std::size_t out, Rng& rng, double gain = 1.0);
  nn::Tensor operator()(const nn::Tensor& pooled) const { return nn::linear(pooled, weight, bias); }
};

}  // namespace molfusion::enc
