// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <numeric>
#include <vector>

#include "molfusion/chemcore.hpp"
#include "molfusion/random.hpp"

namespace molfusion::testing {

// Relabels atoms by `perm` (new index of old atom a is perm[a]) and reverses
// the bond list so bond indices change too.
inline chem::Molecule relabel(const chem::Molecule& mol, const std::vector<std::size_t>& perm) {
  chem::Molecule out;
  out.atoms.resize(mol.num_atoms());
  for (std::size_t a = 0; a < mol.num_atoms(); ++a) {
    out.atoms[perm[a]] = mol.atoms[a];
    out.atoms[perm[a]].index = perm[a];
  }
  for (auto it = mol.bonds.rbegin(); it != mol.bonds.rend(); ++it) {
    out.bonds.push_back(chem::Bond{perm[it->end], perm[it->begin], it->order});
  }
  return out;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  return perm;
}

}  // namespace molfusion::testing
