// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "molfusion/chemcore.hpp"
#include "molfusion/encoders.hpp"
#include "molfusion/fusion.hpp"

namespace molfusion::downstream {

class WidthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingleClass : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateLabels : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskType : std::uint8_t { Classification, Regression };
enum class Aggregation : std::uint8_t { SmilesOnly, MgOnly, Ewa, Cco };

inline constexpr Aggregation kAllAggregations[] = {Aggregation::SmilesOnly, Aggregation::MgOnly, Aggregation::Ewa,
                                                   Aggregation::Cco};

std::string_view to_string(TaskType t);
std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view text);

// Missing labels are stored as NaN.
struct TaskDataset {
  std::string name;
  TaskType task_type = TaskType::Classification;
  std::vector<std::string> smiles;
  std::vector<chem::Molecule> molecules;
  std::vector<std::string> task_names;
  Eigen::MatrixXd labels;  // n_molecules x n_tasks
  std::vector<std::size_t> skipped_rows;  // 1-based data rows whose SMILES failed to parse

  std::size_t size() const { return molecules.size(); }
  std::size_t num_tasks() const { return task_names.size(); }
};

// Reads a CSV with a header row, a `smiles` column and one column per task.
// Empty cells are missing labels. The task type is classification when every
// present label is 0 or 1 and regression otherwise, unless `forced` is given.
TaskDataset read_task_csv(const std::filesystem::path& path, std::string name = {},
                          const TaskType* forced = nullptr);
TaskDataset parse_task_csv(std::string_view text, std::string name, const TaskType* forced = nullptr);

std::vector<double> aggregate(std::span<const double> s_emb, std::span<const double> g_emb, Aggregation mode);

struct Split {
  std::vector<std::size_t> train, valid, test;
};

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// Ring atoms plus the linkers between them, as a mask over atoms.
std::vector<bool> scaffold_atoms(const chem::Molecule& mol);
// Cheap canonical key of the scaffold; empty for acyclic molecules.
std::string scaffold_key(const chem::Molecule& mol);
// Greedy assignment of pre-sorted groups to train, valid and test.
Split assign_groups(const std::vector<std::vector<std::size_t>>& groups, std::size_t n, SplitFractions f = {});
Split scaffold_split(std::span<const chem::Molecule> mols, SplitFractions f = {});

struct ProbeModel {
  TaskType task_type = TaskType::Classification;
  Eigen::RowVectorXd feature_mean;
  Eigen::RowVectorXd feature_scale;
  Eigen::MatrixXd weights;  // n_features x n_tasks, on standardized features
  Eigen::RowVectorXd bias;
  std::vector<bool> present;  // tasks that could be fit
  std::vector<std::size_t> iterations;

  // Raw scores: logits for classification, predictions for regression.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& features) const;
};

struct ProbeOptions {
  std::size_t max_iterations = 5000;
  double grad_tolerance = 1e-6;
  std::uint64_t seed = 0;
};

ProbeModel probe_fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& labels, TaskType task_type,
                     double reg_strength, const ProbeOptions& options = {});

double roc_auc(std::span<const double> scores, std::span<const int> labels);
double rmse(std::span<const double> pred, std::span<const double> target);

struct MetricReport {
  std::string dataset;
  std::string method;
  std::string aggregation;
  std::string metric_name;
  double mean = 0.0;
  double std = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;
  std::size_t n_tasks_evaluated = 0;
  std::vector<double> selected_reg_strength;

  std::string to_json() const;
};

inline constexpr double kRegGrid[] = {1e-3, 1e-2, 1e-1, 1.0};

struct MoleculeEmbeddings {
  Eigen::MatrixXd smiles;  // pooled encoder outputs, one row per molecule
  Eigen::MatrixXd graph;
};

// Pooled encoder outputs (width d_model) or, with `projected`, the shared-space
// projections (width d_shared). Parameters are only read.
MoleculeEmbeddings embed(const fusion::FusionModel& model, std::span<const std::string> smiles,
                         bool projected = false);

Eigen::MatrixXd aggregate_rows(const MoleculeEmbeddings& emb, Aggregation mode);

MetricReport evaluate(const fusion::FusionModel& model, const TaskDataset& ds, std::string_view method,
                      Aggregation mode, std::span<const std::uint64_t> seeds);
// Same protocol on features that were already extracted.
MetricReport evaluate_features(const MoleculeEmbeddings& emb, const TaskDataset& ds, std::string_view method,
                               Aggregation mode, std::span<const std::uint64_t> seeds);

struct AblationMethod {
  std::string name;
  fusion::MolecularObjective molecular;
  fusion::AtomicObjective atomic;
};

const std::vector<AblationMethod>& ablation_methods();

struct AblationTable {
  std::vector<MetricReport> rows;  // dataset-major, then method, then aggregation
  std::vector<MetricReport> best;  // one per dataset and method
  std::vector<std::size_t> optimizer_steps;  // one per method

  std::string to_json() const;
};

AblationTable ablation_grid(std::span<const std::string> corpus, std::span<const TaskDataset> datasets,
                            const enc::EncoderConfig& enc_cfg, const fusion::FusionConfig& cfg,
                            std::span<const std::uint64_t> seeds);

// Projects rows onto their first two principal components.
Eigen::MatrixXd pca2(const Eigen::MatrixXd& data);

}  // namespace molfusion::downstream
