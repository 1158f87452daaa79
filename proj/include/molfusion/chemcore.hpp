// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace molfusion::chem {

// Element classes used for one-hot features. Any bracket element outside the
// organic subset (plus H) collapses to kOther.
enum class ElementClass : std::uint8_t { B, C, N, O, P, S, F, Cl, Br, I, H, Other };
inline constexpr std::size_t kNumElementClasses = 12;

ElementClass element_class(std::string_view symbol);

struct Atom {
  std::string symbol;  // capitalized, e.g. "C", "Cl", "Se"
  ElementClass element = ElementClass::Other;
  int formal_charge = 0;
  bool aromatic = false;
  int explicit_h = 0;  // hydrogens written inside a bracket atom
  int implicit_h = 0;  // hydrogens filled in from standard valence
  bool bracket = false;
  std::size_t index = 0;

  int total_h() const { return explicit_h + implicit_h; }
};

enum class BondOrder : std::uint8_t { Single, Double, Triple, Aromatic };
inline constexpr std::size_t kNumBondOrders = 4;

struct Bond {
  std::size_t begin = 0;
  std::size_t end = 0;
  BondOrder order = BondOrder::Single;

  std::size_t other(std::size_t atom) const { return atom == begin ? end : begin; }
};

struct Molecule {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  std::size_t num_atoms() const { return atoms.size(); }
  std::size_t num_bonds() const { return bonds.size(); }
  // Heavy-atom degree (explicit graph neighbours).
  std::size_t degree(std::size_t atom) const;
  // Per atom, the list of incident bond indices.
  std::vector<std::vector<std::size_t>> adjacency() const;
};

enum class TokenKind : std::uint8_t { Atom, Bond, BranchOpen, BranchClose, RingDigit, Dot };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t offset;  // byte offset into the source string
};

struct TokenizedSmiles {
  std::vector<Token> tokens;
  // atom_map[k] is the molecule atom index denoted by the k-th atom token.
  std::vector<std::size_t> atom_map;
  // atom_token_index[a] is the token position holding atom a.
  std::vector<std::size_t> atom_token_index;

  std::size_t num_atom_tokens() const { return atom_map.size(); }
};

enum class SmilesErrorKind : std::uint8_t {
  EmptyInput,
  UnknownCharacter,
  UnterminatedBracket,
  InvalidBracketAtom,
  UnmatchedRingClosure,
  UnclosedBranch,
  MisplacedBranch,
  MisplacedBond,
  DuplicateBond,
  MultiFragmentInput,
  ValenceOverflow,
};

const char* to_string(SmilesErrorKind kind);

class SmilesError : public std::runtime_error {
 public:
  // `detail` is a position, ring digit or atom index depending on kind.
  SmilesError(SmilesErrorKind kind, std::size_t detail, const std::string& what);

  SmilesErrorKind kind() const noexcept { return kind_; }
  std::size_t detail() const noexcept { return detail_; }

 private:
  SmilesErrorKind kind_;
  std::size_t detail_;
};

TokenizedSmiles tokenize(std::string_view smiles);
std::string detokenize(const TokenizedSmiles& tok);

struct ParsedSmiles {
  Molecule molecule;
  TokenizedSmiles tokens;
};

ParsedSmiles parse(std::string_view smiles);

// Ring membership from bridge detection: an atom or bond is in a ring iff it
// lies on at least one cycle.
struct RingInfo {
  std::vector<bool> atom_in_ring;
  std::vector<bool> bond_in_ring;
};

RingInfo ring_info(const Molecule& mol);

// element(12) + degree 0..6 (7) + formal charge (1) + aromatic (1)
// + total H 0..4 (5) + in-ring (1)
inline constexpr std::size_t kAtomFeatureDim = kNumElementClasses + 7 + 1 + 1 + 5 + 1;
inline constexpr std::size_t kBondFeatureDim = kNumBondOrders;

struct AtomFeatures {
  std::size_t num_atoms = 0;
  std::vector<double> atom;  // num_atoms x kAtomFeatureDim, row-major
  std::vector<double> bond;  // num_bonds x kBondFeatureDim, row-major
  std::vector<bool> in_ring;

  double at(std::size_t atom_index, std::size_t feature) const {
    return atom[atom_index * kAtomFeatureDim + feature];
  }
};

AtomFeatures featurize(const Molecule& mol);

// Offsets of each block inside an atom feature row.
namespace feature_offset {
inline constexpr std::size_t kElement = 0;
inline constexpr std::size_t kDegree = kNumElementClasses;
inline constexpr std::size_t kCharge = kDegree + 7;
inline constexpr std::size_t kAromatic = kCharge + 1;
inline constexpr std::size_t kHydrogens = kAromatic + 1;
inline constexpr std::size_t kInRing = kHydrogens + 5;
}  // namespace feature_offset

}  // namespace molfusion::chem
