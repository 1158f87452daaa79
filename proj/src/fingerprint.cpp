// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "molfusion/fingerprint.hpp"

#include <algorithm>
#include <bit>
#include <set>
#include <string>
#include <tuple>

#include "molfusion/parallel.hpp"
#include "molfusion/random.hpp"

namespace molfusion::fp {

namespace {

constexpr std::uint64_t kHashSeed = 0x4d6f6c46757331ULL;

class EnvironmentHasher {
 public:
  EnvironmentHasher& add(std::uint64_t v) {
    state_ = splitmix64(state_ ^ (v + 0x9e3779b97f4a7c15ULL + (state_ << 6) + (state_ >> 2)));
    return *this;
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = kHashSeed;
};

std::uint64_t initial_invariant(const chem::Atom& atom, std::size_t degree, bool in_ring) {
  return EnvironmentHasher{}
      .add(fnv1a64(atom.symbol))
      .add(degree)
      .add(static_cast<std::uint64_t>(static_cast<std::int64_t>(atom.formal_charge)))
      .add(static_cast<std::uint64_t>(atom.total_h()))
      .add(in_ring ? 1 : 0)
      .value();
}

}  // namespace

std::size_t Fingerprint::popcount() const {
  std::size_t count = 0;
  for (auto w : words) count += static_cast<std::size_t>(std::popcount(w));
  return count;
}

std::vector<std::size_t> Fingerprint::set_bits() const {
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < n_bits; ++b) {
    if (test(b)) out.push_back(b);
  }
  return out;
}

Fingerprint fold(std::vector<std::uint64_t> identifiers, std::size_t n_bits) {
  if (n_bits == 0) throw std::invalid_argument("n_bits must be positive");
  std::sort(identifiers.begin(), identifiers.end());
  identifiers.erase(std::unique(identifiers.begin(), identifiers.end()), identifiers.end());
  Fingerprint fp;
  fp.n_bits = n_bits;
  fp.words.assign((n_bits + 63) / 64, 0);
  for (auto id : identifiers) {
    const std::size_t bit = static_cast<std::size_t>(id % n_bits);
    fp.words[bit / 64] |= std::uint64_t{1} << (bit % 64);
  }
  fp.identifiers = std::move(identifiers);
  return fp;
}

Fingerprint morgan(const chem::Molecule& mol, int radius, std::size_t n_bits) {
  if (radius < 0) throw std::invalid_argument("radius must be non-negative");
  const std::size_t n = mol.num_atoms();
  const auto adj = mol.adjacency();
  const auto rings = chem::ring_info(mol);

  std::vector<std::uint64_t> ids(n);
  for (std::size_t a = 0; a < n; ++a) {
    ids[a] = initial_invariant(mol.atoms[a], adj[a].size(), rings.atom_in_ring[a]);
  }
  std::vector<std::uint64_t> found(ids.begin(), ids.end());

  // Environments are tracked by the bond set they cover. An environment that
  // stops growing, or that another atom already covers, is a structural
  // duplicate and is not emitted again.
  using BondSet = std::vector<bool>;
  std::vector<BondSet> coverage(n, BondSet(mol.num_bonds(), false));
  std::vector<bool> active(n, true);
  std::set<BondSet> seen;

  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next_ids(n);
    std::vector<BondSet> next_coverage = coverage;
    for (std::size_t a = 0; a < n; ++a) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> neighbours;
      for (std::size_t b : adj[a]) {
        const std::size_t other = mol.bonds[b].other(a);
        neighbours.emplace_back(static_cast<std::uint64_t>(mol.bonds[b].order), ids[other]);
        next_coverage[a][b] = true;
        for (std::size_t k = 0; k < mol.num_bonds(); ++k) {
          if (coverage[other][k]) next_coverage[a][k] = true;
        }
      }
      std::sort(neighbours.begin(), neighbours.end());
      EnvironmentHasher h;
      h.add(static_cast<std::uint64_t>(r)).add(ids[a]);
      for (const auto& [order, id] : neighbours) h.add(order).add(id);
      next_ids[a] = h.value();
    }

    std::vector<std::tuple<BondSet, std::uint64_t, std::size_t>> candidates;
    for (std::size_t a = 0; a < n; ++a) {
      if (active[a]) candidates.emplace_back(next_coverage[a], next_ids[a], a);
    }
    std::sort(candidates.begin(), candidates.end());
    for (const auto& [bonds, id, atom] : candidates) {
      if (bonds == coverage[atom] || seen.count(bonds) != 0) {
        active[atom] = false;
        continue;
      }
      seen.insert(bonds);
      found.push_back(id);
    }
    ids = std::move(next_ids);
    coverage = std::move(next_coverage);
  }
  return fold(std::move(found), n_bits);
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.n_bits != b.n_bits) {
    throw LengthMismatch("fingerprint lengths differ: " + std::to_string(a.n_bits) + " vs " +
                         std::to_string(b.n_bits));
  }
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w) {
    both += static_cast<std::size_t>(std::popcount(a.words[w] & b.words[w]));
    either += static_cast<std::size_t>(std::popcount(a.words[w] | b.words[w]));
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

SimilarityMatrix similarity_matrix(std::span<const Fingerprint> fps, std::size_t workers) {
  SimilarityMatrix m;
  m.n = fps.size();
  m.values.assign(m.n * m.n, 0.0);
  parallel_for(
      m.n,
      [&](std::size_t i) {
        for (std::size_t j = 0; j < m.n; ++j) m.values[i * m.n + j] = tanimoto(fps[i], fps[j]);
      },
      workers);
  return m;
}

SimilarityMatrix similarity_matrix(std::span<const chem::Molecule> mols, int radius,
                                   std::size_t n_bits, std::size_t workers) {
  std::vector<Fingerprint> fps(mols.size());
  parallel_for(
      mols.size(), [&](std::size_t i) { fps[i] = morgan(mols[i], radius, n_bits); }, workers);
  return similarity_matrix(std::span<const Fingerprint>(fps), workers);
}

}  // namespace molfusion::fp
