// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "molfusion/downstream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include "json.hpp"
#include <sstream>

#include "molfusion/parallel.hpp"

namespace molfusion::downstream {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw DatasetError("line " + std::to_string(line_no) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_label(const std::string& cell, std::size_t line_no) {
  if (cell.empty()) return kNaN;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw DatasetError("line " + std::to_string(line_no) + ": label '" + cell + "' is not a finite number");
  }
  return v;
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// Mean log-loss (classification) or squared error (regression) over present
// labels, averaged over tasks that have any.
double probe_loss(const ProbeModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd scores = model.predict(x);
  double total = 0.0;
  std::size_t tasks = 0;
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    if (!model.present[static_cast<std::size_t>(k)]) continue;
    double sum = 0.0;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double t = y(i, k);
      if (std::isnan(t)) continue;
      const double s = scores(i, k);
      if (model.task_type == TaskType::Classification) {
        // log(1 + e^{-s}) for positives, log(1 + e^{s}) for negatives.
        const double z = t > 0.5 ? -s : s;
        sum += z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      } else {
        sum += (s - t) * (s - t);
      }
      ++n;
    }
    if (n > 0) {
      total += sum / static_cast<double>(n);
      ++tasks;
    }
  }
  return tasks == 0 ? std::numeric_limits<double>::infinity() : total / static_cast<double>(tasks);
}

struct TestScore {
  double value = kNaN;
  std::size_t tasks = 0;
};

TestScore test_metric(const ProbeModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd scores = model.predict(x);
  double total = 0.0;
  std::size_t tasks = 0;
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    if (!model.present[static_cast<std::size_t>(k)]) continue;
    std::vector<double> s, t;
    std::vector<int> lab;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      if (std::isnan(y(i, k))) continue;
      s.push_back(scores(i, k));
      t.push_back(y(i, k));
      lab.push_back(y(i, k) > 0.5 ? 1 : 0);
    }
    if (s.empty()) continue;
    if (model.task_type == TaskType::Classification) {
      const auto pos = std::count(lab.begin(), lab.end(), 1);
      if (pos == 0 || pos == static_cast<std::ptrdiff_t>(lab.size())) continue;
      total += roc_auc(s, lab);
    } else {
      total += rmse(s, t);
    }
    ++tasks;
  }
  return tasks == 0 ? TestScore{} : TestScore{total / static_cast<double>(tasks), tasks};
}

nlohmann::ordered_json report_json(const MetricReport& r) {
  const auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["method"] = r.method;
  j["aggregation"] = r.aggregation;
  j["metric_name"] = r.metric_name;
  j[r.metric_name] = num(r.mean);
  j["mean"] = num(r.mean);
  j["std"] = num(r.std);
  j["seeds"] = r.seeds;
  auto values = nlohmann::ordered_json::array();
  for (double v : r.values) values.push_back(num(v));
  j["values"] = values;
  j["n_tasks_evaluated"] = r.n_tasks_evaluated;
  j["selected_reg_strength"] = r.selected_reg_strength;
  return j;
}

}  // namespace

std::string_view to_string(TaskType t) { return t == TaskType::Classification ? "classification" : "regression"; }

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::SmilesOnly: return "SMILES_ONLY";
    case Aggregation::MgOnly: return "MG_ONLY";
    case Aggregation::Ewa: return "EWA";
    case Aggregation::Cco: return "CCO";
  }
  return "?";
}

Aggregation parse_aggregation(std::string_view text) {
  for (auto a : kAllAggregations) {
    if (to_string(a) == text) return a;
  }
  throw std::invalid_argument("unknown aggregation: " + std::string(text));
}

TaskDataset parse_task_csv(std::string_view text, std::string name, const TaskType* forced) {
  TaskDataset ds;
  ds.name = std::move(name);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_csv_line(line, line_no);
  }
  if (header.empty()) throw DatasetError("dataset has no header row");
  for (auto& h : header) h = trim(h);
  const auto smiles_col = std::find(header.begin(), header.end(), "smiles");
  if (smiles_col == header.end()) throw DatasetError("line " + std::to_string(line_no) + ": no 'smiles' column");
  const auto sc = static_cast<std::size_t>(smiles_col - header.begin());
  std::vector<std::size_t> task_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != sc) {
      task_cols.push_back(c);
      ds.task_names.push_back(header[c]);
    }
  }
  if (task_cols.empty()) throw DatasetError("dataset has no task columns");

  std::vector<std::vector<double>> rows;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++data_row;
    const auto cells = split_csv_line(line, line_no);
    if (cells.size() != header.size()) {
      throw DatasetError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                         " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> labels;
    for (std::size_t c : task_cols) labels.push_back(parse_label(trim(cells[c]), line_no));
    const std::string smi = trim(cells[sc]);
    try {
      ds.molecules.push_back(chem::parse(smi).molecule);
    } catch (const chem::SmilesError&) {
      ds.skipped_rows.push_back(data_row);
      continue;
    }
    ds.smiles.push_back(smi);
    rows.push_back(std::move(labels));
  }
  if (ds.molecules.empty()) throw DatasetError("dataset has no parseable rows");

  ds.labels.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(task_cols.size()));
  bool binary = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      const double v = rows[i][k];
      ds.labels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
      if (!std::isnan(v) && v != 0.0 && v != 1.0) binary = false;
    }
  }
  ds.task_type = forced != nullptr ? *forced : (binary ? TaskType::Classification : TaskType::Regression);
  if (ds.task_type == TaskType::Classification && !binary) {
    throw DatasetError("classification labels must be 0, 1 or empty");
  }
  return ds;
}

TaskDataset read_task_csv(const std::filesystem::path& path, std::string name, const TaskType* forced) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_task_csv(buf.str(), name.empty() ? path.stem().string() : std::move(name), forced);
}

std::vector<double> aggregate(std::span<const double> s_emb, std::span<const double> g_emb, Aggregation mode) {
  switch (mode) {
    case Aggregation::SmilesOnly: return {s_emb.begin(), s_emb.end()};
    case Aggregation::MgOnly: return {g_emb.begin(), g_emb.end()};
    case Aggregation::Ewa: {
      if (s_emb.size() != g_emb.size()) {
        throw WidthMismatch("EWA needs equal widths, got " + std::to_string(s_emb.size()) + " and " +
                            std::to_string(g_emb.size()));
      }
      std::vector<double> out(s_emb.size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = s_emb[i] + g_emb[i];
      return out;
    }
    case Aggregation::Cco: {
      std::vector<double> out(s_emb.begin(), s_emb.end());
      out.insert(out.end(), g_emb.begin(), g_emb.end());
      return out;
    }
  }
  return {};
}

std::vector<bool> scaffold_atoms(const chem::Molecule& mol) {
  const auto rings = chem::ring_info(mol);
  std::vector<bool> keep(mol.num_atoms(), true);
  if (std::none_of(rings.atom_in_ring.begin(), rings.atom_in_ring.end(), [](bool b) { return b; })) {
    return std::vector<bool>(mol.num_atoms(), false);
  }
  const auto adj = mol.adjacency();
  std::vector<std::size_t> degree(mol.num_atoms());
  for (std::size_t a = 0; a < mol.num_atoms(); ++a) degree[a] = adj[a].size();
  std::vector<std::size_t> leaves;
  for (std::size_t a = 0; a < mol.num_atoms(); ++a) {
    if (degree[a] <= 1 && !rings.atom_in_ring[a]) leaves.push_back(a);
  }
  while (!leaves.empty()) {
    const std::size_t a = leaves.back();
    leaves.pop_back();
    if (!keep[a]) continue;
    keep[a] = false;
    for (std::size_t b : adj[a]) {
      const std::size_t nb = mol.bonds[b].other(a);
      if (keep[nb] && --degree[nb] <= 1 && !rings.atom_in_ring[nb]) leaves.push_back(nb);
    }
  }
  return keep;
}

std::string scaffold_key(const chem::Molecule& mol) {
  const auto keep = scaffold_atoms(mol);
  std::vector<std::size_t> degree(mol.num_atoms(), 0);
  for (const auto& b : mol.bonds) {
    if (keep[b.begin] && keep[b.end]) {
      ++degree[b.begin];
      ++degree[b.end];
    }
  }
  const auto invariant = [&](std::size_t a) {
    return mol.atoms[a].symbol + (mol.atoms[a].aromatic ? "a" : "") + std::to_string(degree[a]);
  };
  std::vector<std::string> atoms, edges;
  for (std::size_t a = 0; a < mol.num_atoms(); ++a) {
    if (keep[a]) atoms.push_back(invariant(a));
  }
  for (const auto& b : mol.bonds) {
    if (!keep[b.begin] || !keep[b.end]) continue;
    auto u = invariant(b.begin), v = invariant(b.end);
    if (v < u) std::swap(u, v);
    edges.push_back(std::to_string(static_cast<int>(b.order)) + ":" + u + "-" + v);
  }
  if (atoms.empty()) return {};
  std::sort(atoms.begin(), atoms.end());
  std::sort(edges.begin(), edges.end());
  std::string key;
  for (const auto& a : atoms) key += a + ",";
  key += "|";
  for (const auto& e : edges) key += e + ",";
  return key;
}

Split assign_groups(const std::vector<std::vector<std::size_t>>& groups, std::size_t n, SplitFractions f) {
  const auto cap_train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n) + 1e-9));
  const auto cap_valid = static_cast<std::size_t>(std::floor(f.valid * static_cast<double>(n) + 1e-9));
  const std::size_t cap_test = n - std::min(n, cap_train + cap_valid);
  Split split;
  for (const auto& g : groups) {
    const std::size_t size = g.size();
    std::vector<std::size_t>* dst = nullptr;
    if (split.train.empty() || split.train.size() + size <= cap_train) {
      dst = &split.train;
    } else if (split.valid.size() + size <= cap_valid) {
      dst = &split.valid;
    } else if (split.test.size() + size <= cap_test) {
      dst = &split.test;
    } else {
      const auto rem = [](std::size_t cap, std::size_t used) {
        return static_cast<long long>(cap) - static_cast<long long>(used);
      };
      dst = rem(cap_valid, split.valid.size()) >= rem(cap_test, split.test.size()) ? &split.valid : &split.test;
    }
    dst->insert(dst->end(), g.begin(), g.end());
  }
  return split;
}

Split scaffold_split(std::span<const chem::Molecule> mols, SplitFractions f) {
  std::map<std::string, std::vector<std::size_t>> by_key;
  for (std::size_t i = 0; i < mols.size(); ++i) by_key[scaffold_key(mols[i])].push_back(i);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups(by_key.begin(), by_key.end());
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.second.size() > b.second.size(); });
  std::vector<std::vector<std::size_t>> ordered;
  for (auto& g : groups) ordered.push_back(std::move(g.second));
  return assign_groups(ordered, mols.size(), f);
}

Eigen::MatrixXd ProbeModel::predict(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd z =
      (features.rowwise() - feature_mean).array().rowwise() / feature_scale.array();
  return (z * weights).rowwise() + bias;
}

ProbeModel probe_fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& labels, TaskType task_type,
                     double reg_strength, const ProbeOptions& options) {
  if (features.rows() != labels.rows()) {
    throw LengthMismatch("probe_fit: " + std::to_string(features.rows()) + " feature rows, " +
                         std::to_string(labels.rows()) + " label rows");
  }
  if (reg_strength < 0.0) throw std::invalid_argument("reg_strength must be >= 0");
  const Eigen::Index n = features.rows(), d = features.cols(), k_tasks = labels.cols();
  ProbeModel model;
  model.task_type = task_type;
  model.feature_mean = n > 0 ? Eigen::RowVectorXd(features.colwise().mean()) : Eigen::RowVectorXd::Zero(d);
  model.feature_scale = Eigen::RowVectorXd::Ones(d);
  if (n > 1) {
    const Eigen::RowVectorXd var =
        (features.rowwise() - model.feature_mean).array().square().colwise().sum() / static_cast<double>(n);
    for (Eigen::Index j = 0; j < d; ++j) model.feature_scale(j) = var(j) > 1e-24 ? std::sqrt(var(j)) : 1.0;
  }
  model.weights = Eigen::MatrixXd::Zero(d, k_tasks);
  model.bias = Eigen::RowVectorXd::Zero(k_tasks);
  model.present.assign(static_cast<std::size_t>(k_tasks), false);
  model.iterations.assign(static_cast<std::size_t>(k_tasks), 0);
  const Eigen::MatrixXd z = (features.rowwise() - model.feature_mean).array().rowwise() / model.feature_scale.array();

  Rng rng(options.seed, "probe");
  for (Eigen::Index k = 0; k < k_tasks; ++k) {
    std::vector<std::size_t> rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isnan(labels(i, k))) rows.push_back(static_cast<std::size_t>(i));
    }
    if (rows.empty()) continue;
    const Eigen::MatrixXd x = take_rows(z, rows);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels(static_cast<Eigen::Index>(rows[i]), k);
    const auto m = static_cast<double>(rows.size());

    if (task_type == TaskType::Regression) {
      const Eigen::RowVectorXd xm = x.colwise().mean();
      const double ym = y.mean();
      const Eigen::MatrixXd xc = x.rowwise() - xm;
      const Eigen::MatrixXd a = xc.transpose() * xc + reg_strength * Eigen::MatrixXd::Identity(d, d);
      const Eigen::VectorXd w = a.completeOrthogonalDecomposition().solve(xc.transpose() * (y.array() - ym).matrix());
      model.weights.col(k) = w;
      model.bias(k) = ym - xm.dot(w);
      model.present[static_cast<std::size_t>(k)] = true;
      continue;
    }

    const double positives = y.sum();
    if (positives == 0.0 || positives == m) continue;
    // Step 1/L with L bounding the Hessian of mean log-loss plus the penalty.
    Eigen::MatrixXd xa(x.rows(), d + 1);
    xa << x, Eigen::VectorXd::Ones(x.rows());
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(xa.transpose() * xa / m,
                                                                       Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .maxCoeff();
    const double step = 1.0 / (0.25 * lmax + reg_strength);
    Eigen::VectorXd w(d);
    for (Eigen::Index j = 0; j < d; ++j) w(j) = 0.01 * rng.normal();
    double b = 0.0;
    std::size_t it = 0;
    for (; it < options.max_iterations; ++it) {
      const Eigen::VectorXd s = x * w + Eigen::VectorXd::Constant(x.rows(), b);
      Eigen::VectorXd r(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = sigmoid(s(i)) - y(i);
      const Eigen::VectorXd gw = x.transpose() * r / m + reg_strength * w;
      const double gb = r.sum() / m;
      if (std::sqrt(gw.squaredNorm() + gb * gb) < options.grad_tolerance) break;
      w -= step * gw;
      b -= step * gb;
    }
    model.weights.col(k) = w;
    model.bias(k) = b;
    model.present[static_cast<std::size_t>(k)] = true;
    model.iterations[static_cast<std::size_t>(k)] = it;
  }
  return model;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw LengthMismatch("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Each positive wins against every negative with a lower score and ties
  // with those of equal score; counts are kept as integers (doubled ties).
  std::uint64_t n_pos = 0, n_neg = 0, twice_wins = 0, neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos_here = 0, neg_here = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      const int l = labels[order[j]];
      if (l != 0 && l != 1) throw std::invalid_argument("roc_auc: labels must be 0 or 1");
      (l == 1 ? pos_here : neg_here) += 1;
      ++j;
    }
    twice_wins += pos_here * (2 * neg_below + neg_here);
    neg_below += neg_here;
    n_pos += pos_here;
    n_neg += neg_here;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) throw SingleClass("roc_auc needs at least one positive and one negative");
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double rmse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw LengthMismatch("rmse: lengths " + std::to_string(pred.size()) + " and " + std::to_string(target.size()));
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - target[i]) * (pred[i] - target[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

std::string MetricReport::to_json() const { return report_json(*this).dump(2); }

MoleculeEmbeddings embed(const fusion::FusionModel& model, std::span<const std::string> smiles, bool projected) {
  const std::size_t n = smiles.size();
  const std::size_t ws = projected ? model.config().d_shared : model.encoder_config().d_model;
  const std::size_t wg = projected ? model.config().d_shared : model.encoder_config().graph_width();
  MoleculeEmbeddings out{Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ws)),
                         Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(wg))};
  parallel_for(n, [&](std::size_t i) {
    nn::NoGradGuard guard;
    const auto s = model.sample(smiles[i]);
    nn::Tensor sp = model.smiles_encoder().encode(s.token_ids, s.tokens).pooled;
    nn::Tensor gp = model.graph_encoder().encode(s.molecule, s.features).pooled;
    if (projected) {
      sp = model.smiles_projection()(sp);
      gp = model.graph_projection()(gp);
    }
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < ws; ++j) out.smiles(r, static_cast<Eigen::Index>(j)) = sp.values()[j];
    for (std::size_t j = 0; j < wg; ++j) out.graph(r, static_cast<Eigen::Index>(j)) = gp.values()[j];
  });
  return out;
}

Eigen::MatrixXd aggregate_rows(const MoleculeEmbeddings& emb, Aggregation mode) {
  switch (mode) {
    case Aggregation::SmilesOnly: return emb.smiles;
    case Aggregation::MgOnly: return emb.graph;
    case Aggregation::Ewa:
      if (emb.smiles.cols() != emb.graph.cols()) {
        throw WidthMismatch("EWA needs equal widths, got " + std::to_string(emb.smiles.cols()) + " and " +
                            std::to_string(emb.graph.cols()));
      }
      return emb.smiles + emb.graph;
    case Aggregation::Cco: {
      Eigen::MatrixXd out(emb.smiles.rows(), emb.smiles.cols() + emb.graph.cols());
      out << emb.smiles, emb.graph;
      return out;
    }
  }
  return {};
}

MetricReport evaluate_features(const MoleculeEmbeddings& emb, const TaskDataset& ds, std::string_view method,
                               Aggregation mode, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("evaluate needs at least one seed");
  const Eigen::MatrixXd x = aggregate_rows(emb, mode);
  const Split split = scaffold_split(ds.molecules);
  const Eigen::MatrixXd x_train = take_rows(x, split.train), y_train = take_rows(ds.labels, split.train);
  const Eigen::MatrixXd x_valid = take_rows(x, split.valid), y_valid = take_rows(ds.labels, split.valid);
  const Eigen::MatrixXd x_test = take_rows(x, split.test), y_test = take_rows(ds.labels, split.test);

  MetricReport report;
  report.dataset = ds.name;
  report.method = std::string(method);
  report.aggregation = std::string(to_string(mode));
  report.metric_name = ds.task_type == TaskType::Classification ? "roc_auc" : "rmse";
  report.seeds.assign(seeds.begin(), seeds.end());
  for (std::uint64_t seed : seeds) {
    std::optional<ProbeModel> best;
    double best_loss = std::numeric_limits<double>::infinity();
    double best_reg = kRegGrid[0];
    for (double reg : kRegGrid) {
      auto probe = probe_fit(x_train, y_train, ds.task_type, reg, ProbeOptions{.seed = seed});
      const double loss = split.valid.empty() ? probe_loss(probe, x_train, y_train) : probe_loss(probe, x_valid, y_valid);
      if (!best || loss < best_loss) {
        best_loss = loss;
        best_reg = reg;
        best = std::move(probe);
      }
    }
    const auto score = test_metric(*best, x_test, y_test);
    if (score.tasks == 0) {
      throw DegenerateLabels("dataset " + ds.name + ": no task has usable train and test labels");
    }
    report.values.push_back(score.value);
    report.selected_reg_strength.push_back(best_reg);
    report.n_tasks_evaluated = score.tasks;
  }
  report.mean = std::accumulate(report.values.begin(), report.values.end(), 0.0) / static_cast<double>(report.values.size());
  report.std = sample_std(report.values);
  return report;
}

MetricReport evaluate(const fusion::FusionModel& model, const TaskDataset& ds, std::string_view method,
                      Aggregation mode, std::span<const std::uint64_t> seeds) {
  return evaluate_features(embed(model, ds.smiles), ds, method, mode, seeds);
}

const std::vector<AblationMethod>& ablation_methods() {
  using fusion::AtomicObjective;
  using fusion::MolecularObjective;
  static const std::vector<AblationMethod> methods = {
      {"no_train", MolecularObjective::None, AtomicObjective::None},
      {"contrastive", MolecularObjective::Contrastive, AtomicObjective::None},
      {"molsim", MolecularObjective::MolSim, AtomicObjective::None},
      {"atomalign", MolecularObjective::None, AtomicObjective::AtomAlign},
      {"contrastive+atomalign", MolecularObjective::Contrastive, AtomicObjective::AtomAlign},
      {"molsim+unimodal_mask", MolecularObjective::MolSim, AtomicObjective::UnimodalMask},
      {"molfusion", MolecularObjective::MolSim, AtomicObjective::AtomAlign},
  };
  return methods;
}

AblationTable ablation_grid(std::span<const std::string> corpus, std::span<const TaskDataset> datasets,
                            const enc::EncoderConfig& enc_cfg, const fusion::FusionConfig& cfg,
                            std::span<const std::uint64_t> seeds) {
  const auto& methods = ablation_methods();
  std::vector<std::vector<MoleculeEmbeddings>> features(methods.size());
  AblationTable table;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    auto mcfg = cfg;
    mcfg.molecular = methods[m].molecular;
    mcfg.atomic = methods[m].atomic;
    auto model = fusion::build_model(corpus, enc_cfg, mcfg);
    table.optimizer_steps.push_back(fusion::train(model, corpus).optimizer_steps);
    for (const auto& ds : datasets) features[m].push_back(embed(model, ds.smiles));
  }
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::optional<MetricReport> best;
      for (auto agg : kAllAggregations) {
        auto report = evaluate_features(features[m][d], datasets[d], methods[m].name, agg, seeds);
        const bool better = !best || (datasets[d].task_type == TaskType::Classification ? report.mean > best->mean
                                                                                       : report.mean < best->mean);
        if (better) best = report;
        table.rows.push_back(std::move(report));
      }
      table.best.push_back(*best);
    }
  }
  return table;
}

std::string AblationTable::to_json() const {
  nlohmann::ordered_json j;
  auto methods = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < ablation_methods().size(); ++m) {
    methods.push_back({{"method", ablation_methods()[m].name}, {"optimizer_steps", optimizer_steps.at(m)}});
  }
  j["methods"] = methods;
  auto grid = nlohmann::ordered_json::array();
  for (const auto& r : rows) grid.push_back(report_json(r));
  j["grid"] = grid;
  auto b = nlohmann::ordered_json::array();
  for (const auto& r : best) b.push_back(report_json(r));
  j["best_per_method"] = b;
  return j.dump(2);
}

Eigen::MatrixXd pca2(const Eigen::MatrixXd& data) {
  const Eigen::Index n = data.rows(), d = data.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, 2);
  if (n == 0 || d == 0) return out;
  const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(1, n - 1));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, d); ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.col(c) = centered * v;
  }
  return out;
}

}  // namespace molfusion::downstream
