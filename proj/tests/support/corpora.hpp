// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "molfusion/random.hpp"

namespace molfusion::testing {

inline const std::vector<std::string>& toy_corpus() {
  static const std::vector<std::string> corpus = {
      "CCO",
      "CC(=O)O",
      "c1ccccc1",
      "Cc1ccccc1",
      "Oc1ccccc1",
      "CC(=O)Oc1ccccc1C(=O)O",
      "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
      "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
      "CC(=O)Nc1ccc(O)cc1",
      "C1CCCCC1",
      "ClCCl",
      "CCN(CC)CC",
      "c1ccncc1",
      "OC(=O)CCC(=O)O",
      "CC(C)O",
      "C#N",
      "CS(=O)C",
      "NC(=O)N",
      "c1ccc2ccccc2c1",
      "OCC(O)CO",
  };
  return corpus;
}

struct LabeledSmiles {
  std::string smiles;
  bool has_oxygen = false;
  int heavy_atoms = 0;
};

// Random acyclic chains decorated with ring linkers and side groups. Every
// unit is a valid SMILES fragment that attaches through its last atom, so the
// concatenation is always parseable. Exactly half of the molecules contain
// oxygen.
inline std::vector<LabeledSmiles> oxygen_corpus(std::size_t n, std::uint64_t seed) {
  struct Unit {
    const char* text;
    bool oxygen;
    int atoms;
  };
  static const std::vector<Unit> plain = {
      {"C", false, 1},          {"C", false, 1},          {"N", false, 1},
      {"S", false, 1},          {"C(C)", false, 2},       {"C(N)", false, 2},
      {"C(F)", false, 2},       {"C(Cl)", false, 2},      {"c1ccc(cc1)", false, 6},
      {"C1CCC(CC1)", false, 6}, {"c1ccc(nc1)", false, 6}, {"C1CC1", false, 3},
      {"C(=C)", false, 2},      {"C(C#N)", false, 3},     {"C1CCN(CC1)", false, 6},
  };
  static const std::vector<Unit> oxy = {
      {"O", true, 1},           {"C(=O)", true, 2},       {"C(O)", true, 2},
      {"c1ccc(o1)", true, 5},   {"C1CCOC(C1)", true, 6},  {"S(=O)(=O)", true, 3},
  };
  Rng rng(seed, "oxygen-corpus");
  std::vector<LabeledSmiles> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool want_oxygen = i % 2 == 0;
    const std::size_t length = 2 + rng.uniform_index(6);
    const std::size_t oxy_slot = rng.uniform_index(length);
    LabeledSmiles mol;
    mol.smiles = "C";
    mol.heavy_atoms = 1;
    for (std::size_t k = 0; k < length; ++k) {
      const Unit& u = (want_oxygen && k == oxy_slot) ? oxy[rng.uniform_index(oxy.size())]
                                                    : plain[rng.uniform_index(plain.size())];
      mol.smiles += u.text;
      mol.heavy_atoms += u.atoms;
      mol.has_oxygen = mol.has_oxygen || u.oxygen;
    }
    mol.smiles += "C";
    mol.heavy_atoms += 1;
    out.push_back(std::move(mol));
  }
  return out;
}

}  // namespace molfusion::testing
