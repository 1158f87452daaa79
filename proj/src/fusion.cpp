// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "molfusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "molfusion/optim.hpp"
#include "molfusion/parallel.hpp"

namespace molfusion::fusion {

using nn::Tensor;

std::string_view to_string(MolecularObjective v) {
  switch (v) {
    case MolecularObjective::None: return "none";
    case MolecularObjective::MolSim: return "molsim";
    case MolecularObjective::Contrastive: return "contrastive";
  }
  return "?";
}

std::string_view to_string(AtomicObjective v) {
  switch (v) {
    case AtomicObjective::None: return "none";
    case AtomicObjective::AtomAlign: return "atomalign";
    case AtomicObjective::UnimodalMask: return "unimodal_mask";
  }
  return "?";
}

std::string_view to_string(UnmaskHead v) { return v == UnmaskHead::Folded ? "folded" : "binary"; }

MolecularObjective parse_molecular_objective(std::string_view text) {
  for (auto v : {MolecularObjective::None, MolecularObjective::MolSim, MolecularObjective::Contrastive}) {
    if (to_string(v) == text) return v;
  }
  throw enc::InvalidConfig("unknown molecular objective: " + std::string(text));
}

AtomicObjective parse_atomic_objective(std::string_view text) {
  for (auto v : {AtomicObjective::None, AtomicObjective::AtomAlign, AtomicObjective::UnimodalMask}) {
    if (to_string(v) == text) return v;
  }
  throw enc::InvalidConfig("unknown atomic objective: " + std::string(text));
}

UnmaskHead parse_unmask_head(std::string_view text) {
  for (auto v : {UnmaskHead::Folded, UnmaskHead::Binary}) {
    if (to_string(v) == text) return v;
  }
  throw enc::InvalidConfig("unknown unmask_head: " + std::string(text));
}

void FusionConfig::validate() const {
  if (!(tau > 0.0)) throw enc::InvalidConfig("tau must be > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw enc::InvalidConfig("alpha must lie in [0, 1]");
  if (!(beta >= 0.0)) throw enc::InvalidConfig("beta must be >= 0");
  if (!(molsim_weight >= 0.0)) throw enc::InvalidConfig("molsim_weight must be >= 0");
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) throw enc::InvalidConfig("mask_rate must lie in [0, 1]");
  if (!(lr > 0.0)) throw enc::InvalidConfig("lr must be > 0");
  if (batch_size == 0) throw enc::InvalidConfig("batch_size must be >= 1");
  if (d_shared == 0) throw enc::InvalidConfig("d_shared must be >= 1");
  if (fp_radius < 0) throw enc::InvalidConfig("fp_radius must be >= 0");
  if (fp_bits == 0) throw enc::InvalidConfig("fp_bits must be >= 1");
}

Tensor molsim_similarity(const Tensor& s, const Tensor& g, double tau) {
  if (s.rows() != g.rows() || s.cols() != g.cols()) {
    throw nn::ShapeMismatch("S is " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) + " but G is " +
                            std::to_string(g.rows()) + "x" + std::to_string(g.cols()));
  }
  return nn::scale(nn::matmul(s, nn::transpose(g)), 1.0 / tau);
}

Tensor molsim_loss(const Tensor& s, const Tensor& g, const Tensor& target, double tau) {
  if (target.rows() != s.rows() || target.cols() != s.rows()) {
    throw nn::ShapeMismatch("similarity target must be " + std::to_string(s.rows()) + "x" +
                            std::to_string(s.rows()));
  }
  return nn::mse(molsim_similarity(s, g, tau), target);
}

Tensor molsim_loss(const Tensor& s, const Tensor& g, const fp::SimilarityMatrix& target, double tau) {
  return molsim_loss(s, g, Tensor::from_values(target.n, target.n, target.values), tau);
}

Tensor contrastive_baseline_loss(const Tensor& s, const Tensor& g, double tau) {
  const Tensor logits = molsim_similarity(s, g, tau);
  std::vector<std::size_t> diagonal(s.rows());
  std::iota(diagonal.begin(), diagonal.end(), 0);
  const Tensor rows = nn::cross_entropy(logits, diagonal);
  const Tensor cols = nn::cross_entropy(nn::transpose(logits), diagonal);
  return nn::scale(nn::add(rows, cols), 0.5);
}

namespace {

struct FlatAtoms {
  Tensor diff;
  std::vector<std::size_t> masked_rows, masked_labels, unmasked_rows;
};

void check_masking(const AtomLevelInput& in, std::size_t rows) {
  if (in.masking == nullptr) throw std::invalid_argument("atom-level input without a masking outcome");
  if (in.masking->mask_indicator.size() != rows || in.masking->atom_type_labels.size() != rows) {
    throw nn::ShapeMismatch("masking outcome covers " + std::to_string(in.masking->mask_indicator.size()) +
                            " atoms, embeddings have " + std::to_string(rows));
  }
}

// Stacks the per-molecule rows of `pick(input)` and records, with offsets,
// which rows were masked.
template <typename Pick>
FlatAtoms flatten(std::span<const AtomLevelInput> batch, Pick pick) {
  FlatAtoms flat;
  std::vector<Tensor> parts;
  std::size_t offset = 0;
  for (const auto& in : batch) {
    const Tensor rows = pick(in);
    check_masking(in, rows.rows());
    for (std::size_t a = 0; a < rows.rows(); ++a) {
      if (in.masking->mask_indicator[a] != 0) {
        flat.masked_rows.push_back(offset + a);
        flat.masked_labels.push_back(in.masking->atom_type_labels[a]);
      } else {
        flat.unmasked_rows.push_back(offset + a);
      }
    }
    offset += rows.rows();
    parts.push_back(rows);
  }
  if (offset == 0) throw EmptyMolecule("atom-level loss over a batch without atoms");
  flat.diff = parts.size() == 1 ? parts.front() : nn::concat_rows(parts);
  return flat;
}

}  // namespace

AtomAlignTerms atomalign_terms(std::span<const AtomLevelInput> batch, const AtomAlignHead& head, double alpha) {
  const FlatAtoms flat = flatten(batch, [](const AtomLevelInput& in) {
    if (in.graph_per_atom.rows() != in.masked_per_atom.rows() ||
        in.graph_per_atom.cols() != in.masked_per_atom.cols()) {
      throw nn::ShapeMismatch("graph and masked SMILES embeddings differ in shape");
    }
    return nn::sub(in.graph_per_atom, in.masked_per_atom);
  });
  const Tensor logits = head(flat.diff);
  const std::size_t v = head.atom_types;

  std::optional<Tensor> mask_term, unmask_term;
  if (!flat.masked_rows.empty()) {
    Tensor rows = nn::gather_rows(logits, flat.masked_rows);
    if (head.mode == UnmaskHead::Binary) rows = nn::slice_cols(rows, 0, v);
    mask_term = nn::cross_entropy(rows, flat.masked_labels);
  }
  if (!flat.unmasked_rows.empty()) {
    Tensor rows = nn::gather_rows(logits, flat.unmasked_rows);
    std::size_t target = head.not_masked_class();
    if (head.mode == UnmaskHead::Binary) {
      rows = nn::slice_cols(rows, v, 2);
      target = 1;
    }
    unmask_term = nn::cross_entropy(rows, std::vector<std::size_t>(flat.unmasked_rows.size(), target));
  }

  AtomAlignTerms out;
  if (mask_term) out.mask = mask_term->item();
  if (unmask_term) out.unmask = unmask_term->item();
  if (mask_term && unmask_term) {
    out.loss = nn::add(nn::scale(*mask_term, alpha), nn::scale(*unmask_term, 1.0 - alpha));
  } else {
    out.loss = mask_term ? *mask_term : *unmask_term;
  }
  return out;
}

Tensor atomalign_loss(std::span<const AtomLevelInput> batch, const AtomAlignHead& head, double alpha) {
  return atomalign_terms(batch, head, alpha).loss;
}

Tensor atomalign_loss(const enc::AtomEmbeddingSequence& graph, const enc::AtomEmbeddingSequence& masked,
                      const enc::MaskingOutcome& masking, const AtomAlignHead& head, double alpha) {
  const AtomLevelInput in{graph.per_atom, masked.per_atom, &masking};
  return atomalign_loss(std::span(&in, 1), head, alpha);
}

Tensor unimodal_mask_loss(std::span<const AtomLevelInput> batch, const UnimodalHead& head) {
  const FlatAtoms flat = flatten(batch, [](const AtomLevelInput& in) { return in.masked_per_atom; });
  if (flat.masked_rows.empty()) throw EmptyMolecule("unimodal mask loss without masked atoms");
  const Tensor rows = nn::gather_rows(flat.diff, flat.masked_rows);
  return nn::cross_entropy(nn::linear(rows, head.weight, head.bias), flat.masked_labels);
}

Sample make_sample(std::string_view smiles, const enc::Vocabulary& vocab, int fp_radius, std::size_t fp_bits) {
  auto parsed = chem::parse(smiles);
  Sample s;
  s.smiles = std::string(smiles);
  s.token_ids = vocab.encode(parsed.tokens);
  s.features = chem::featurize(parsed.molecule);
  s.fingerprint = fp::morgan(parsed.molecule, fp_radius, fp_bits);
  s.molecule = std::move(parsed.molecule);
  s.tokens = std::move(parsed.tokens);
  return s;
}

FusionModel::FusionModel(enc::EncoderConfig enc_cfg, FusionConfig cfg, enc::Vocabulary vocab)
    : enc_cfg_(enc_cfg), cfg_(cfg), vocab_(std::move(vocab)) {
  if (enc_cfg_.vocab_size != vocab_.size()) {
    throw enc::InvalidConfig("vocab_size " + std::to_string(enc_cfg_.vocab_size) + " does not match vocabulary of " +
                             std::to_string(vocab_.size()) + " tokens");
  }
  enc_cfg_.validate();
  cfg_.validate();
  if (cfg_.atomic == AtomicObjective::AtomAlign && enc_cfg_.graph_width() != enc_cfg_.d_model) {
    throw enc::InvalidConfig("atomalign needs equal encoder widths, got graph " + std::to_string(enc_cfg_.graph_width()) +
                             " and smiles " + std::to_string(enc_cfg_.d_model));
  }
  const std::uint64_t seed = cfg_.seed;
  {
    Rng rng(seed, "init.smiles");
    smiles_ = enc::SmilesEncoder(store_, enc_cfg_, rng);
  }
  {
    Rng rng(seed, "init.graph");
    graph_ = enc::GraphEncoder(store_, enc_cfg_, rng);
  }
  {
    Rng rng(seed, "init.projection");
    const double gain = 1.0 / std::sqrt(static_cast<double>(cfg_.d_shared));
    smiles_proj_ = enc::Projection::create(store_, "proj.smiles", enc_cfg_.d_model, cfg_.d_shared, rng, gain);
    graph_proj_ = enc::Projection::create(store_, "proj.graph", enc_cfg_.graph_width(), cfg_.d_shared, rng, gain);
  }
  const std::size_t v = vocab_.atom_type_count();
  {
    Rng rng(seed, "init.atomalign");
    const std::size_t classes = cfg_.unmask_head == UnmaskHead::Folded ? v + 1 : v + 2;
    align_head_.weight = store_.add_xavier("head.atomalign.w", enc_cfg_.d_model, classes, rng);
    align_head_.bias = store_.add_constant("head.atomalign.b", 1, classes, 0.0);
    align_head_.mode = cfg_.unmask_head;
    align_head_.atom_types = v;
  }
  {
    Rng rng(seed, "init.unimodal");
    unimodal_head_.weight = store_.add_xavier("head.unimodal.w", enc_cfg_.d_model, v, rng);
    unimodal_head_.bias = store_.add_constant("head.unimodal.b", 1, v, 0.0);
  }
}

LossBreakdown molfusion_loss(const FusionModel& model, std::span<const Sample* const> batch,
                             std::span<const enc::MaskingOutcome> masks) {
  const auto& cfg = model.config();
  if (!cfg.trains()) throw std::logic_error("configuration has no training objective");
  if (batch.empty()) throw std::invalid_argument("empty batch");

  const bool molecular = cfg.molecular != MolecularObjective::None && cfg.molsim_weight != 0.0;
  const bool atomic = cfg.atomic != AtomicObjective::None && cfg.beta != 0.0;
  const bool need_graph = molecular || cfg.atomic == AtomicObjective::AtomAlign;
  if (atomic && masks.size() != batch.size()) throw std::invalid_argument("one masking outcome per sample required");

  std::vector<Tensor> s_rows, g_rows;
  std::vector<AtomLevelInput> atoms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Sample& smp = *batch[i];
    std::optional<enc::AtomEmbeddingSequence> graph;
    if (need_graph) graph = model.graph_encoder().encode(smp.molecule, smp.features);
    if (molecular) {
      s_rows.push_back(model.smiles_projection()(model.smiles_encoder().encode(smp.token_ids, smp.tokens).pooled));
      g_rows.push_back(model.graph_projection()(graph->pooled));
    }
    if (atomic) {
      const auto masked = model.smiles_encoder().encode(masks[i].masked_token_ids, smp.tokens);
      atoms.push_back(AtomLevelInput{graph ? graph->per_atom : Tensor{}, masked.per_atom, &masks[i]});
    }
  }

  LossBreakdown out;
  std::optional<Tensor> mol_term, atom_term;
  if (molecular) {
    const Tensor s = nn::concat_rows(s_rows);
    const Tensor g = nn::concat_rows(g_rows);
    if (cfg.molecular == MolecularObjective::MolSim) {
      std::vector<fp::Fingerprint> fps;
      fps.reserve(batch.size());
      for (const Sample* smp : batch) fps.push_back(smp->fingerprint);
      mol_term = molsim_loss(s, g, fp::similarity_matrix(fps, 1), cfg.tau);
    } else {
      mol_term = contrastive_baseline_loss(s, g, cfg.tau);
    }
    out.molecular = mol_term->item();
  }
  if (atomic) {
    if (cfg.atomic == AtomicObjective::AtomAlign) {
      auto terms = atomalign_terms(atoms, model.align_head(), cfg.alpha);
      out.mask = terms.mask;
      out.unmask = terms.unmask;
      atom_term = terms.loss;
    } else {
      atom_term = unimodal_mask_loss(atoms, model.unimodal_head());
      out.mask = atom_term->item();
    }
    out.atomic = atom_term->item();
  }

  if (mol_term && atom_term) {
    out.total = nn::add(nn::scale(*mol_term, cfg.molsim_weight), nn::scale(*atom_term, cfg.beta));
  } else if (mol_term) {
    out.total = cfg.molsim_weight == 1.0 ? *mol_term : nn::scale(*mol_term, cfg.molsim_weight);
  } else if (atom_term) {
    out.total = nn::scale(*atom_term, cfg.beta);
  } else {
    throw std::logic_error("all objective weights are zero");
  }
  return out;
}

namespace {

std::vector<Sample> make_samples(const FusionModel& model, std::span<const std::string> corpus,
                                 std::size_t* skipped) {
  std::vector<std::optional<Sample>> slots(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    try {
      slots[i] = model.sample(corpus[i]);
    } catch (const chem::SmilesError&) {
    }
  });
  std::vector<Sample> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  if (skipped != nullptr) *skipped = corpus.size() - out.size();
  return out;
}

std::vector<enc::MaskingOutcome> fixed_masks(const FusionModel& model, std::span<const Sample> samples,
                                             std::string_view stream) {
  Rng rng(model.config().seed, stream);
  std::vector<enc::MaskingOutcome> masks;
  masks.reserve(samples.size());
  for (const auto& s : samples) masks.push_back(enc::mask_atoms(s.tokens, model.vocabulary(), model.config().mask_rate, rng));
  return masks;
}

std::vector<Sample> select(std::span<const Sample> all, std::span<const std::size_t> idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

}  // namespace

FusionModel build_model(std::span<const std::string> corpus, const enc::EncoderConfig& enc_cfg,
                        const FusionConfig& cfg) {
  if (corpus.empty()) throw EmptyCorpus("training corpus is empty");
  std::vector<chem::TokenizedSmiles> toks;
  for (const auto& smi : corpus) {
    try {
      toks.push_back(chem::parse(smi).tokens);
    } catch (const chem::SmilesError&) {
    }
  }
  if (toks.empty()) throw EmptyCorpus("no SMILES in the corpus could be parsed");
  auto vocab = enc::Vocabulary::build(toks);
  enc::EncoderConfig c = enc_cfg;
  c.vocab_size = vocab.size();
  return FusionModel(c, cfg, std::move(vocab));
}

double evaluate_loss(const FusionModel& model, std::span<const Sample> samples,
                     std::span<const enc::MaskingOutcome> masks) {
  if (samples.empty()) throw std::invalid_argument("evaluate_loss over no samples");
  nn::NoGradGuard guard;
  const std::size_t bs = model.config().batch_size;
  double total = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += bs) {
    const std::size_t end = std::min(samples.size(), start + bs);
    std::vector<const Sample*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    const auto loss = molfusion_loss(model, batch, masks.subspan(start, end - start));
    total += loss.total.item() * static_cast<double>(end - start);
  }
  return total / static_cast<double>(samples.size());
}

double masked_atom_accuracy(const FusionModel& model, std::span<const Sample> samples,
                            std::span<const enc::MaskingOutcome> masks) {
  nn::NoGradGuard guard;
  const bool unimodal = model.config().atomic == AtomicObjective::UnimodalMask;
  const std::size_t v = model.vocabulary().atom_type_count();
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (masks[i].masked_atoms.empty()) continue;
    const Tensor masked = model.smiles_encoder().encode(masks[i].masked_token_ids, s.tokens).per_atom;
    Tensor logits;
    if (unimodal) {
      logits = nn::linear(masked, model.unimodal_head().weight, model.unimodal_head().bias);
    } else {
      const Tensor graph = model.graph_encoder().encode(s.molecule, s.features).per_atom;
      logits = model.align_head()(nn::sub(graph, masked));
      if (model.align_head().mode == UnmaskHead::Binary) logits = nn::slice_cols(logits, 0, v);
    }
    for (std::size_t a : masks[i].masked_atoms) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < logits.cols(); ++c) {
        if (logits.at(a, c) > logits.at(a, best)) best = c;
      }
      correct += best == masks[i].atom_type_labels[a] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train(FusionModel& model, std::span<const std::string> corpus, const EpochCallback& on_epoch) {
  const auto& cfg = model.config();
  if (corpus.empty()) throw EmptyCorpus("training corpus is empty");
  TrainResult result;
  const std::vector<Sample> samples = make_samples(model, corpus, &result.skipped_smiles);
  if (samples.empty()) throw EmptyCorpus("no SMILES in the corpus could be parsed");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(cfg.seed, "split");
  split_rng.shuffle(std::span<std::size_t>(order));
  const std::size_t n = samples.size();
  const std::size_t n_valid =
      n >= 2 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n)))) : 0;
  result.valid_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
  result.train_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
  if (!cfg.trains()) return result;

  const auto train_set = select(samples, result.train_indices);
  const auto valid_set = select(samples, result.valid_indices);
  const auto train_eval_masks = fixed_masks(model, train_set, "eval-mask");
  const auto valid_masks = fixed_masks(model, valid_set, "valid-mask");
  result.initial_train_loss = evaluate_loss(model, train_set, train_eval_masks);

  Rng shuffle_rng(cfg.seed, "shuffle");
  Rng mask_rng(cfg.seed, "mask");
  nn::Adam adam(model.store(), nn::AdamOptions{.lr = cfg.lr});
  std::vector<std::size_t> epoch_order(train_set.size());
  std::iota(epoch_order.begin(), epoch_order.end(), 0);

  double best = std::numeric_limits<double>::infinity();
  auto best_params = model.store().snapshot();
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(epoch_order));
    EpochRecord rec;
    rec.epoch = epoch;
    double mol_sum = 0, mask_sum = 0, unmask_sum = 0;
    std::size_t mol_n = 0, mask_n = 0, unmask_n = 0, batches = 0;
    for (std::size_t start = 0; start < epoch_order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(epoch_order.size(), start + cfg.batch_size);
      std::vector<const Sample*> batch;
      std::vector<enc::MaskingOutcome> masks;
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = train_set[epoch_order[i]];
        batch.push_back(&s);
        masks.push_back(enc::mask_atoms(s.tokens, model.vocabulary(), cfg.mask_rate, mask_rng));
      }
      model.store().zero_grad();
      const auto loss = molfusion_loss(model, batch, masks);
      loss.total.backward();
      adam.step();
      ++result.optimizer_steps;
      ++batches;
      rec.train_loss += loss.total.item();
      if (loss.molecular) mol_sum += *loss.molecular, ++mol_n;
      if (loss.mask) mask_sum += *loss.mask, ++mask_n;
      if (loss.unmask) unmask_sum += *loss.unmask, ++unmask_n;
    }
    rec.train_loss /= static_cast<double>(batches);
    if (mol_n > 0) rec.molecular = mol_sum / static_cast<double>(mol_n);
    if (mask_n > 0) rec.mask = mask_sum / static_cast<double>(mask_n);
    if (unmask_n > 0) rec.unmask = unmask_sum / static_cast<double>(unmask_n);
    rec.valid_loss = valid_set.empty() ? rec.train_loss : evaluate_loss(model, valid_set, valid_masks);

    rec.improved = rec.valid_loss < best;
    if (rec.improved) {
      best = rec.valid_loss;
      best_params = model.store().snapshot();
      result.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (!rec.improved && stale >= cfg.patience) break;
  }
  if (cfg.restore_best) model.store().restore(best_params);
  result.final_train_loss = evaluate_loss(model, train_set, train_eval_masks);
  return result;
}

}  // namespace molfusion::fusion
