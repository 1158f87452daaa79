// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "molfusion/downstream.hpp"
#include "support/corpora.hpp"

using namespace molfusion;
using namespace molfusion::downstream;
using Catch::Matchers::WithinAbs;

namespace {

double brute_force_auc(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[i] != 1 || l[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

std::vector<chem::Molecule> parse_all(const std::vector<std::string>& smiles) {
  std::vector<chem::Molecule> out;
  for (const auto& s : smiles) out.push_back(chem::parse(s).molecule);
  return out;
}

std::size_t count_kept(const std::vector<bool>& v) { return static_cast<std::size_t>(std::count(v.begin(), v.end(), true)); }

enc::EncoderConfig tiny_encoder() {
  enc::EncoderConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.mp_rounds = 2;
  return c;
}

}  // namespace

TEST_CASE("aggregate", "[downstream]") {
  const std::vector<double> s{1, 2}, g{3, 4}, wide{1, 2, 3};
  CHECK(aggregate(s, g, Aggregation::Ewa) == std::vector<double>{4, 6});
  CHECK(aggregate(s, g, Aggregation::Cco) == std::vector<double>{1, 2, 3, 4});
  CHECK(aggregate(s, g, Aggregation::MgOnly) == g);
  CHECK(aggregate(s, g, Aggregation::SmilesOnly) == s);
  CHECK_THROWS_AS(aggregate(s, wide, Aggregation::Ewa), WidthMismatch);
  CHECK(aggregate(s, wide, Aggregation::Cco).size() == 5);
  CHECK(parse_aggregation("CCO") == Aggregation::Cco);
  CHECK_THROWS(parse_aggregation("SUM"));

  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(1 + rng.uniform_index(6)), b(1 + rng.uniform_index(6));
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();
    const auto c = aggregate(a, b, Aggregation::Cco);
    CHECK(std::vector<double>(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(a.size())) == a);
    CHECK(std::vector<double>(c.begin() + static_cast<std::ptrdiff_t>(a.size()), c.end()) == b);
  }
}

TEST_CASE("roc_auc", "[downstream][metric]") {
  CHECK(roc_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1}) == 0.5);
  CHECK(roc_auc(std::vector<double>{0.8, 0.6, 0.4}, std::vector<int>{1, 0, 1}) == 0.5);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), SingleClass);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), LengthMismatch);

  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.uniform_index(49);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.uniform_index(8)) / 4.0;  // coarse grid forces ties
      l[i] = static_cast<int>(rng.uniform_index(2));
    }
    l[0] = 1;
    l[1] = 0;
    const double auc = roc_auc(s, l);
    CHECK(auc == brute_force_auc(s, l));
    std::vector<double> transformed(n);
    for (std::size_t i = 0; i < n; ++i) transformed[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(roc_auc(transformed, l) == auc);
  }
}

TEST_CASE("rmse", "[downstream][metric]") {
  const std::vector<double> a{0, 0}, b{3, 4};
  CHECK(rmse(a, a) == 0.0);
  CHECK_THAT(rmse(a, b), WithinAbs(std::sqrt(12.5), 1e-12));
  CHECK(rmse(std::vector<double>{2.5}, std::vector<double>{-1.0}) == 3.5);
  CHECK_THROWS_AS(rmse(a, std::vector<double>{1}), LengthMismatch);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), LengthMismatch);
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> p(1 + rng.uniform_index(30)), q(p.size());
    double ss = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = rng.normal();
      q[i] = rng.normal();
      ss += (p[i] - q[i]) * (p[i] - q[i]);
    }
    CHECK_THAT(rmse(p, q), WithinAbs(std::sqrt(ss / static_cast<double>(p.size())), 1e-12));
  }
}

TEST_CASE("scaffolds", "[downstream][split]") {
  SECTION("scaffold atoms are rings plus linkers") {
    CHECK(count_kept(scaffold_atoms(chem::parse("CCCO").molecule)) == 0);
    CHECK(count_kept(scaffold_atoms(chem::parse("Cc1ccccc1").molecule)) == 6);
    CHECK(count_kept(scaffold_atoms(chem::parse("c1ccccc1CCc1ccccc1").molecule)) == 14);
    CHECK(count_kept(scaffold_atoms(chem::parse("O=C1CCCCC1CCN").molecule)) == 6);
  }
  SECTION("key ignores side chains and atom order") {
    CHECK(scaffold_key(chem::parse("CCO").molecule).empty());
    CHECK(scaffold_key(chem::parse("Cc1ccccc1").molecule) == scaffold_key(chem::parse("c1ccccc1CCO").molecule));
    CHECK(scaffold_key(chem::parse("c1ccccc1").molecule) != scaffold_key(chem::parse("C1CCCCC1").molecule));
    CHECK(scaffold_key(chem::parse("c1ccccc1CC1CC1").molecule) == scaffold_key(chem::parse("C1CC1Cc1ccccc1").molecule));
  }
}

TEST_CASE("scaffold_split", "[downstream][split]") {
  SECTION("acyclic molecules form one group") {
    const auto mols = parse_all({"C", "CC", "CCC", "CCO", "CN", "CCCC", "OCCO", "CC(C)C", "CS", "CCl"});
    const auto s = scaffold_split(mols);
    CHECK(s.train.size() == 10);
    CHECK(s.valid.empty());
    CHECK(s.test.empty());
  }
  SECTION("8/1/1 fits exactly") {
    const auto mols = parse_all({"Cc1ccccc1", "CCc1ccccc1", "Oc1ccccc1", "Nc1ccccc1", "c1ccccc1", "Clc1ccccc1",
                                 "Fc1ccccc1", "OCc1ccccc1", "C1CCCCC1", "c1ccc2ccccc2c1"});
    const auto s = scaffold_split(mols);
    CHECK(s.train.size() == 8);
    CHECK(s.valid.size() == 1);
    CHECK(s.test.size() == 1);
    CHECK(assign_groups({{0, 1, 2, 3, 4, 5, 6, 7}, {8}, {9}}, 10).test == std::vector<std::size_t>{9});
  }
  SECTION("8/2 overflows into valid") {
    const auto s = assign_groups({{0, 1, 2, 3, 4, 5, 6, 7}, {8, 9}}, 10);
    CHECK(s.train.size() == 8);
    CHECK(s.valid.size() == 2);
    CHECK(s.test.empty());
  }
  SECTION("disjoint, covering, deterministic, scaffold-pure") {
    std::vector<chem::Molecule> mols;
    for (const auto& m : testing::oxygen_corpus(200, 5)) mols.push_back(chem::parse(m.smiles).molecule);
    const auto a = scaffold_split(mols);
    const auto b = scaffold_split(mols);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK(a.test == b.test);
    std::set<std::size_t> all;
    all.insert(a.train.begin(), a.train.end());
    all.insert(a.valid.begin(), a.valid.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == mols.size());
    CHECK(a.train.size() + a.valid.size() + a.test.size() == mols.size());
    std::set<std::string> train_keys, valid_keys, test_keys;
    for (auto i : a.train) train_keys.insert(scaffold_key(mols[i]));
    for (auto i : a.valid) valid_keys.insert(scaffold_key(mols[i]));
    for (auto i : a.test) test_keys.insert(scaffold_key(mols[i]));
    for (const auto& k : valid_keys) CHECK(train_keys.count(k) == 0);
    for (const auto& k : test_keys) CHECK((train_keys.count(k) == 0 && valid_keys.count(k) == 0));
    CHECK(a.train.size() <= 160);
  }
}

TEST_CASE("probe_fit", "[downstream][probe]") {
  SECTION("separable data is fit perfectly") {
    Rng rng(4);
    Eigen::MatrixXd x(40, 2);
    Eigen::MatrixXd y(40, 1);
    for (Eigen::Index i = 0; i < 40; ++i) {
      const bool pos = i % 2 == 0;
      x(i, 0) = rng.uniform(0.2, 1.0) * (pos ? 1 : -1);
      x(i, 1) = rng.normal();
      y(i, 0) = pos ? 1 : 0;
    }
    const auto model = probe_fit(x, y, TaskType::Classification, 1e-3);
    const auto scores = model.predict(x);
    for (Eigen::Index i = 0; i < 40; ++i) CHECK((scores(i, 0) > 0) == (y(i, 0) == 1.0));
  }
  SECTION("ridge without penalty solves a determined system") {
    Rng rng(5);
    Eigen::MatrixXd x(3, 2), y(3, 1);
    for (Eigen::Index i = 0; i < 3; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = rng.normal();
      y(i, 0) = rng.normal();
    }
    const auto model = probe_fit(x, y, TaskType::Regression, 0.0);
    CHECK((model.predict(x) - y).norm() < 1e-10);
  }
  SECTION("missing and single-class tasks are absent") {
    const double nan = std::nan("");
    Eigen::MatrixXd x(4, 1);
    x << 0, 1, 2, 3;
    Eigen::MatrixXd y(4, 3);
    y << nan, 1, 0,  //
        nan, 1, 1,   //
        nan, 1, 0,   //
        nan, nan, 1;
    const auto model = probe_fit(x, y, TaskType::Classification, 0.1);
    CHECK(model.present == std::vector<bool>{false, false, true});
  }
  SECTION("seed only changes the starting point") {
    Rng rng(6);
    Eigen::MatrixXd x(30, 3), y(30, 1);
    for (Eigen::Index i = 0; i < 30; ++i) {
      for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = rng.normal();
      y(i, 0) = x(i, 0) + 0.5 * rng.normal() > 0 ? 1 : 0;
    }
    const auto a = probe_fit(x, y, TaskType::Classification, 0.1, {.seed = 1});
    const auto b = probe_fit(x, y, TaskType::Classification, 0.1, {.seed = 2});
    CHECK((a.weights - b.weights).norm() < 1e-5);
  }
  SECTION("row mismatch") {
    CHECK_THROWS_AS(probe_fit(Eigen::MatrixXd(3, 1), Eigen::MatrixXd(2, 1), TaskType::Regression, 0.1), LengthMismatch);
  }
}

TEST_CASE("task CSV", "[downstream][io]") {
  const auto ds = parse_task_csv("smiles,a,b\nCCO,1,\nc1ccccc1,0,1\nC(C,1,0\n\"CC(=O)O\",,0\n", "toy");
  CHECK(ds.size() == 3);
  CHECK(ds.task_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.task_type == TaskType::Classification);
  CHECK(ds.skipped_rows == std::vector<std::size_t>{3});
  CHECK(std::isnan(ds.labels(0, 1)));
  CHECK(std::isnan(ds.labels(2, 0)));
  CHECK(ds.labels(1, 1) == 1.0);

  const auto reg = parse_task_csv("y,smiles\n1.5,CC\n-2,CCC\n", "reg");
  CHECK(reg.task_type == TaskType::Regression);
  CHECK(reg.smiles[1] == "CCC");

  CHECK_THROWS_WITH(parse_task_csv("smi,a\nC,1\n", "x"), Catch::Matchers::ContainsSubstring("smiles"));
  CHECK_THROWS_WITH(parse_task_csv("smiles,a\nC,abc\n", "x"), Catch::Matchers::ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(parse_task_csv("smiles,a\nC,1,2\n", "x"), Catch::Matchers::ContainsSubstring("line 2"));
  const TaskType cls = TaskType::Classification;
  CHECK_THROWS_AS(parse_task_csv("smiles,a\nC,2\n", "x", &cls), DatasetError);
  CHECK_THROWS_AS(read_task_csv("/nonexistent/file.csv"), DatasetError);
}

TEST_CASE("evaluate", "[downstream][evaluate]") {
  const auto data = testing::oxygen_corpus(120, 11);
  std::vector<std::string> corpus;
  std::string cls_csv = "smiles,oxygen\n", reg_csv = "smiles,atoms\n";
  for (const auto& m : data) {
    corpus.push_back(m.smiles);
    cls_csv += m.smiles + "," + (m.has_oxygen ? "1" : "0") + "\n";
    reg_csv += m.smiles + "," + std::to_string(m.heavy_atoms) + "\n";
  }
  const auto cls = parse_task_csv(cls_csv, "oxygen");
  const auto reg = parse_task_csv(reg_csv, "atoms");
  REQUIRE(reg.task_type == TaskType::Regression);

  fusion::FusionConfig cfg;
  cfg.epochs = 3;
  cfg.d_shared = 8;
  auto model = fusion::build_model(corpus, tiny_encoder(), cfg);
  fusion::train(model, corpus);
  const std::vector<std::uint64_t> seeds{1, 2, 3};

  SECTION("deterministic and read-only") {
    const auto before = model.store().snapshot();
    const auto a = evaluate(model, cls, "m", Aggregation::Cco, seeds);
    const auto b = evaluate(model, cls, "m", Aggregation::Cco, seeds);
    CHECK(a.to_json() == b.to_json());
    CHECK(model.store().snapshot() == before);
    CHECK(a.values.size() == 3);
    CHECK(a.metric_name == "roc_auc");
    CHECK(a.to_json().find("\"roc_auc\"") != std::string::npos);
    CHECK(a.n_tasks_evaluated == 1);
    CHECK((a.mean >= 0.0 && a.mean <= 1.0));
  }
  SECTION("regression beats the constant predictor") {
    const auto report = evaluate(model, reg, "m", Aggregation::Cco, seeds);
    const auto split = scaffold_split(reg.molecules);
    double mean = 0;
    for (auto i : split.train) mean += reg.labels(static_cast<Eigen::Index>(i), 0);
    mean /= static_cast<double>(split.train.size());
    std::vector<double> pred, target;
    for (auto i : split.test) {
      pred.push_back(mean);
      target.push_back(reg.labels(static_cast<Eigen::Index>(i), 0));
    }
    CHECK(report.metric_name == "rmse");
    CHECK(report.mean < rmse(pred, target));
  }
  SECTION("std is the sample standard deviation of per-seed values") {
    const auto r = evaluate(model, reg, "m", Aggregation::SmilesOnly, seeds);
    double m = 0, ss = 0;
    for (double v : r.values) m += v / 3.0;
    for (double v : r.values) ss += (v - m) * (v - m);
    CHECK_THAT(r.std, WithinAbs(std::sqrt(ss / 2.0), 1e-15));
  }
  SECTION("EWA needs matching widths") {
    auto enc_cfg = tiny_encoder();
    enc_cfg.graph_d_model = 6;
    auto diag_cfg = cfg;
    diag_cfg.atomic = fusion::AtomicObjective::UnimodalMask;
    auto diag = fusion::build_model(corpus, enc_cfg, diag_cfg);
    CHECK_THROWS_AS(evaluate(diag, cls, "m", Aggregation::Ewa, seeds), WidthMismatch);
    CHECK_NOTHROW(evaluate(diag, cls, "m", Aggregation::Cco, seeds));
  }
}

TEST_CASE("ablation_grid", "[downstream][ablation]") {
  const auto data = testing::oxygen_corpus(60, 13);
  std::vector<std::string> corpus;
  std::string csv = "smiles,oxygen\n";
  for (const auto& m : data) {
    corpus.push_back(m.smiles);
    csv += m.smiles + "," + (m.has_oxygen ? "1" : "0") + "\n";
  }
  const std::vector<TaskDataset> datasets{parse_task_csv(csv, "oxygen")};
  fusion::FusionConfig cfg;
  cfg.epochs = 2;
  cfg.d_shared = 8;
  const std::vector<std::uint64_t> seeds{1};
  const auto table = ablation_grid(corpus, datasets, tiny_encoder(), cfg, seeds);

  CHECK(table.rows.size() == 7 * 4);
  CHECK(table.best.size() == 7);
  CHECK(table.optimizer_steps.front() == 0);
  for (std::size_t m = 1; m < 7; ++m) CHECK(table.optimizer_steps[m] > 0);
  std::set<std::pair<std::string, std::string>> cells;
  for (const auto& r : table.rows) cells.emplace(r.method, r.aggregation);
  CHECK(cells.size() == 28);
  for (std::size_t m = 0; m < 7; ++m) {
    double best = 0;
    for (std::size_t a = 0; a < 4; ++a) best = std::max(best, table.rows[m * 4 + a].mean);
    CHECK(table.best[m].mean == best);
  }

  auto standalone = fusion::build_model(corpus, tiny_encoder(), cfg);
  fusion::train(standalone, corpus);
  const auto cco = evaluate(standalone, datasets[0], "molfusion", Aggregation::Cco, seeds);
  CHECK(cco.to_json() == table.rows[6 * 4 + 3].to_json());
  CHECK(table.to_json() == ablation_grid(corpus, datasets, tiny_encoder(), cfg, seeds).to_json());
}

TEST_CASE("pca2", "[downstream]") {
  Rng rng(8);
  Eigen::MatrixXd line(20, 4);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const double t = rng.normal();
    line.row(i) << t, 2 * t, -t, 0.5 * t;
  }
  const auto p = pca2(line);
  CHECK(p.cols() == 2);
  CHECK(p.col(1).norm() < 1e-9);
  CHECK_THAT(p.col(0).squaredNorm(), WithinAbs((line.rowwise() - line.colwise().mean()).squaredNorm(), 1e-9));
  CHECK(pca2(line) == p);
}
