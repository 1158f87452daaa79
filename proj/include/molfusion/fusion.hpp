// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "molfusion/chemcore.hpp"
#include "molfusion/encoders.hpp"
#include "molfusion/fingerprint.hpp"
#include "molfusion/parameters.hpp"
#include "molfusion/tensor.hpp"

namespace molfusion::fusion {

class EmptyCorpus : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyMolecule : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class MolecularObjective : std::uint8_t { None, MolSim, Contrastive };
enum class AtomicObjective : std::uint8_t { None, AtomAlign, UnimodalMask };
enum class UnmaskHead : std::uint8_t { Folded, Binary };

std::string_view to_string(MolecularObjective v);
std::string_view to_string(AtomicObjective v);
std::string_view to_string(UnmaskHead v);
MolecularObjective parse_molecular_objective(std::string_view text);
AtomicObjective parse_atomic_objective(std::string_view text);
UnmaskHead parse_unmask_head(std::string_view text);

struct FusionConfig {
  double tau = 0.1;
  double alpha = 0.8;
  double beta = 1.0;
  double mask_rate = 0.15;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t patience = 5;
  // When false the trainer returns the last-epoch parameters instead of the
  // best-validation ones.
  bool restore_best = true;
  std::size_t d_shared = 64;
  int fp_radius = fp::kDefaultRadius;
  std::size_t fp_bits = fp::kDefaultBits;
  MolecularObjective molecular = MolecularObjective::MolSim;
  AtomicObjective atomic = AtomicObjective::AtomAlign;
  // Multiplier on the molecular term. Zero removes the term from the graph
  // entirely, which isolates the atomic objective for diagnostics.
  double molsim_weight = 1.0;
  UnmaskHead unmask_head = UnmaskHead::Folded;

  bool trains() const { return molecular != MolecularObjective::None || atomic != AtomicObjective::None; }
  void validate() const;
};

// Single linear layer over per-atom difference vectors. In folded mode it
// emits V + 1 logits whose last class means "not masked"; in binary mode it
// emits V atom-type logits followed by a (masked, not masked) pair.
struct AtomAlignHead {
  nn::Tensor weight;
  nn::Tensor bias;
  UnmaskHead mode = UnmaskHead::Folded;
  std::size_t atom_types = 0;

  nn::Tensor operator()(const nn::Tensor& d) const { return nn::linear(d, weight, bias); }
  std::size_t not_masked_class() const { return atom_types; }
};

struct UnimodalHead {
  nn::Tensor weight;
  nn::Tensor bias;
};

// Per-molecule inputs to the atom-level objectives.
struct AtomLevelInput {
  nn::Tensor graph_per_atom;
  nn::Tensor masked_per_atom;
  const enc::MaskingOutcome* masking = nullptr;
};

struct AtomAlignTerms {
  nn::Tensor loss;
  std::optional<double> mask;
  std::optional<double> unmask;
};

nn::Tensor molsim_similarity(const nn::Tensor& s, const nn::Tensor& g, double tau);
nn::Tensor molsim_loss(const nn::Tensor& s, const nn::Tensor& g, const nn::Tensor& target, double tau);
nn::Tensor molsim_loss(const nn::Tensor& s, const nn::Tensor& g, const fp::SimilarityMatrix& target, double tau);
nn::Tensor contrastive_baseline_loss(const nn::Tensor& s, const nn::Tensor& g, double tau);

AtomAlignTerms atomalign_terms(std::span<const AtomLevelInput> batch, const AtomAlignHead& head, double alpha);
nn::Tensor atomalign_loss(std::span<const AtomLevelInput> batch, const AtomAlignHead& head, double alpha);
nn::Tensor atomalign_loss(const enc::AtomEmbeddingSequence& graph, const enc::AtomEmbeddingSequence& masked,
                          const enc::MaskingOutcome& masking, const AtomAlignHead& head, double alpha);
nn::Tensor unimodal_mask_loss(std::span<const AtomLevelInput> batch, const UnimodalHead& head);

// One parsed corpus entry with everything the objectives need precomputed.
struct Sample {
  std::string smiles;
  chem::Molecule molecule;
  chem::TokenizedSmiles tokens;
  std::vector<std::size_t> token_ids;
  chem::AtomFeatures features;
  fp::Fingerprint fingerprint;
};

Sample make_sample(std::string_view smiles, const enc::Vocabulary& vocab, int fp_radius, std::size_t fp_bits);

class FusionModel {
 public:
  FusionModel(enc::EncoderConfig enc_cfg, FusionConfig cfg, enc::Vocabulary vocab);

  FusionModel(const FusionModel&) = delete;
  FusionModel& operator=(const FusionModel&) = delete;
  FusionModel(FusionModel&&) = default;
  FusionModel& operator=(FusionModel&&) = default;

  const enc::EncoderConfig& encoder_config() const { return enc_cfg_; }
  const FusionConfig& config() const { return cfg_; }
  const enc::Vocabulary& vocabulary() const { return vocab_; }
  nn::ParameterStore& store() { return store_; }
  const nn::ParameterStore& store() const { return store_; }

  const enc::SmilesEncoder& smiles_encoder() const { return smiles_; }
  const enc::GraphEncoder& graph_encoder() const { return graph_; }
  const enc::Projection& smiles_projection() const { return smiles_proj_; }
  const enc::Projection& graph_projection() const { return graph_proj_; }
  const AtomAlignHead& align_head() const { return align_head_; }
  const UnimodalHead& unimodal_head() const { return unimodal_head_; }

  Sample sample(std::string_view smiles) const {
    return make_sample(smiles, vocab_, cfg_.fp_radius, cfg_.fp_bits);
  }

 private:
  enc::EncoderConfig enc_cfg_;
  FusionConfig cfg_;
  enc::Vocabulary vocab_;
  nn::ParameterStore store_;
  enc::SmilesEncoder smiles_;
  enc::GraphEncoder graph_;
  enc::Projection smiles_proj_;
  enc::Projection graph_proj_;
  AtomAlignHead align_head_;
  UnimodalHead unimodal_head_;
};

struct LossBreakdown {
  nn::Tensor total;
  std::optional<double> molecular;
  std::optional<double> atomic;
  std::optional<double> mask;
  std::optional<double> unmask;
};

LossBreakdown molfusion_loss(const FusionModel& model, std::span<const Sample* const> batch,
                             std::span<const enc::MaskingOutcome> masks);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  std::optional<double> molecular;
  std::optional<double> mask;
  std::optional<double> unmask;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t optimizer_steps = 0;
  std::size_t best_epoch = 0;
  std::size_t skipped_smiles = 0;
  double initial_train_loss = 0.0;
  double final_train_loss = 0.0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> valid_indices;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Builds the vocabulary from the corpus, initializes a model and trains it.
// Unparseable entries are skipped; a corpus with nothing usable throws.
FusionModel build_model(std::span<const std::string> corpus, const enc::EncoderConfig& enc_cfg,
                        const FusionConfig& cfg);
TrainResult train(FusionModel& model, std::span<const std::string> corpus, const EpochCallback& on_epoch = {});

// Mean objective over `samples` in batches of cfg.batch_size with fixed masks,
// without recording gradients.
double evaluate_loss(const FusionModel& model, std::span<const Sample> samples,
                     std::span<const enc::MaskingOutcome> masks);

// Fraction of masked atoms whose top-1 head prediction (over all head classes)
// is the correct atom type.
double masked_atom_accuracy(const FusionModel& model, std::span<const Sample> samples,
                            std::span<const enc::MaskingOutcome> masks);

}  // namespace molfusion::fusion
