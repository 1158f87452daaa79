// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <iterator>

#include "molfusion/fingerprint.hpp"
#include "support/molecule_ops.hpp"
#include "support/test_data.hpp"

using namespace molfusion;
using molfusion::chem::parse;

namespace {

fp::Fingerprint fp_of(const std::string& smiles, int radius = 2, std::size_t bits = 2048) {
  return fp::morgan(parse(smiles).molecule, radius, bits);
}

fp::Fingerprint from_bits(std::initializer_list<std::size_t> bits, std::size_t n_bits) {
  fp::Fingerprint f;
  f.n_bits = n_bits;
  f.words.assign((n_bits + 63) / 64, 0);
  for (auto b : bits) f.words[b / 64] |= std::uint64_t{1} << (b % 64);
  return f;
}

double identifier_tanimoto(const fp::Fingerprint& a, const fp::Fingerprint& b) {
  std::vector<std::uint64_t> both, either;
  std::set_intersection(a.identifiers.begin(), a.identifiers.end(), b.identifiers.begin(),
                        b.identifiers.end(), std::back_inserter(both));
  std::set_union(a.identifiers.begin(), a.identifiers.end(), b.identifiers.begin(),
                 b.identifiers.end(), std::back_inserter(either));
  return static_cast<double>(both.size()) / static_cast<double>(either.size());
}

}  // namespace

TEST_CASE("morgan identifiers", "[fingerprint]") {
  SECTION("ethanol radius 0 has three distinct atom invariants") {
    CHECK(fp_of("CCO", 0).identifiers.size() == 3);
  }
  SECTION("methane yields one identifier at any radius") {
    for (int r = 0; r <= 4; ++r) {
      const auto f = fp_of("C", r);
      CHECK(f.identifiers.size() == 1);
      CHECK(f.popcount() == 1);
    }
  }
  SECTION("atom order does not matter") {
    CHECK(fp_of("OCC") == fp_of("CCO"));
  }
  SECTION("ethane radius 1 keeps one copy of the shared bond environment") {
    // two identical atom invariants + one environment covering the C-C bond
    CHECK(fp_of("CC", 1).identifiers.size() == 2);
  }
  SECTION("larger radius never loses identifiers") {
    const auto r1 = fp_of("CC(=O)Oc1ccccc1C(=O)O", 1);
    const auto r2 = fp_of("CC(=O)Oc1ccccc1C(=O)O", 2);
    CHECK(std::includes(r2.identifiers.begin(), r2.identifiers.end(), r1.identifiers.begin(),
                        r1.identifiers.end()));
    CHECK(r2.identifiers.size() > r1.identifiers.size());
  }
  SECTION("folding is determined by identifiers and length") {
    const auto f = fp_of("c1ccncc1", 2, 512);
    CHECK(fp::fold(f.identifiers, 512) == f);
    CHECK(f.popcount() >= 1);
  }
  SECTION("environment counts match the reference toolkit") {
    // Distinct radius-2 environments, frozen from RDKit's Morgan generator.
    CHECK(fp_of("CCO").identifiers.size() == 6);
    CHECK(fp_of("C").identifiers.size() == 1);
    CHECK(fp_of("CC").identifiers.size() == 2);
    CHECK(fp_of("c1ccccc1").identifiers.size() == 3);
    CHECK(fp_of("CC(=O)Oc1ccccc1C(=O)O").identifiers.size() == 25);
  }
}

TEST_CASE("tanimoto", "[fingerprint]") {
  const auto f = fp_of("CC(=O)Nc1ccc(O)cc1");
  CHECK(fp::tanimoto(f, f) == 1.0);
  CHECK(fp::tanimoto(from_bits({1, 5}, 64), from_bits({2, 9}, 64)) == 0.0);
  CHECK(fp::tanimoto(from_bits({1, 2, 3}, 64), from_bits({2, 3, 4}, 64)) == 0.5);
  CHECK(fp::tanimoto(from_bits({}, 64), from_bits({}, 64)) == 0.0);
  CHECK_THROWS_AS(fp::tanimoto(fp_of("CC", 2, 1024), fp_of("CC", 2, 2048)), fp::LengthMismatch);
}

TEST_CASE("alternative spellings give identical fingerprints", "[fingerprint][property]") {
  const auto pairs = testing::read_tsv("spelling_pairs.tsv");
  REQUIRE(pairs.size() == 30);
  for (const auto& p : pairs) {
    INFO(p[0] << " vs " << p[1]);
    CHECK(fp_of(p[0]) == fp_of(p[1]));
  }
}

TEST_CASE("fingerprints are invariant under random atom relabeling", "[fingerprint][property]") {
  Rng rng(7, "relabel");
  for (const auto& row : testing::read_tsv("parser_oracle.tsv")) {
    const auto mol = parse(row[0]).molecule;
    for (int trial = 0; trial < 5; ++trial) {
      const auto permuted = testing::relabel(mol, testing::random_permutation(mol.num_atoms(), rng));
      INFO(row[0]);
      CHECK(fp::morgan(permuted) == fp::morgan(mol));
    }
  }
}

TEST_CASE("folded and identifier-set tanimoto agree without collisions", "[fingerprint][property]") {
  const auto rows = testing::read_tsv("parser_oracle.tsv");
  for (std::size_t i = 0; i + 1 < rows.size(); i += 3) {
    const auto a = fp_of(rows[i][0], 2, std::size_t{1} << 20);
    const auto b = fp_of(rows[i + 1][0], 2, std::size_t{1} << 20);
    REQUIRE(a.popcount() == a.identifiers.size());
    REQUIRE(b.popcount() == b.identifiers.size());
    CHECK(fp::tanimoto(a, b) == identifier_tanimoto(a, b));
  }
}

TEST_CASE("similarity matrix", "[fingerprint]") {
  SECTION("single molecule") {
    const std::vector<chem::Molecule> mols{parse("CCO").molecule};
    const auto m = fp::similarity_matrix(std::span<const chem::Molecule>(mols));
    CHECK(m.n == 1);
    CHECK(m(0, 0) == 1.0);
  }
  SECTION("identical molecules give all ones") {
    const std::vector<chem::Molecule> mols(4, parse("c1ccccc1O").molecule);
    const auto m = fp::similarity_matrix(std::span<const chem::Molecule>(mols));
    for (double v : m.values) CHECK(v == 1.0);
  }
  SECTION("matches pairwise calls and is symmetric") {
    const std::vector<std::string> smiles{"CCO", "c1ccccc1", "CC(=O)O"};
    std::vector<chem::Molecule> mols;
    for (const auto& s : smiles) mols.push_back(parse(s).molecule);
    const auto m = fp::similarity_matrix(std::span<const chem::Molecule>(mols));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(m(i, j) == fp::tanimoto(fp_of(smiles[i]), fp_of(smiles[j])));
        CHECK(m(i, j) == m(j, i));
      }
    }
  }
  SECTION("duplicated list has repeated blocks") {
    std::vector<chem::Molecule> mols;
    for (const auto& row : testing::read_tsv("parser_oracle.tsv")) mols.push_back(parse(row[0]).molecule);
    mols.resize(10);
    const std::size_t n = mols.size();
    auto doubled = mols;
    doubled.insert(doubled.end(), mols.begin(), mols.end());
    const auto m = fp::similarity_matrix(std::span<const chem::Molecule>(doubled));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(m(i, j + n) == m(i, j));
        CHECK(m(i + n, j) == m(i, j));
        CHECK(m(i + n, j + n) == m(i, j));
      }
    }
  }
  SECTION("threaded result is bit-identical to sequential") {
    std::vector<chem::Molecule> mols;
    for (const auto& row : testing::read_tsv("parser_oracle.tsv")) mols.push_back(parse(row[0]).molecule);
    const auto seq = fp::similarity_matrix(std::span<const chem::Molecule>(mols), 2, 2048, 1);
    const auto par = fp::similarity_matrix(std::span<const chem::Molecule>(mols), 2, 2048, 4);
    CHECK(seq.values == par.values);
  }
}
