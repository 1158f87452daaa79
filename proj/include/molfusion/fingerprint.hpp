// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "molfusion/chemcore.hpp"

namespace molfusion::fp {

inline constexpr int kDefaultRadius = 2;
inline constexpr std::size_t kDefaultBits = 2048;

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Circular (Morgan/ECFP-style) fingerprint: the sorted set of environment
// identifiers plus its fold onto n_bits.
struct Fingerprint {
  std::vector<std::uint64_t> identifiers;
  std::size_t n_bits = 0;
  std::vector<std::uint64_t> words;

  bool test(std::size_t bit) const { return (words[bit / 64] >> (bit % 64)) & 1U; }
  std::size_t popcount() const;
  std::vector<std::size_t> set_bits() const;

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

// Folds an identifier set; bit = id mod n_bits.
Fingerprint fold(std::vector<std::uint64_t> identifiers, std::size_t n_bits);

Fingerprint morgan(const chem::Molecule& mol, int radius = kDefaultRadius,
                   std::size_t n_bits = kDefaultBits);

// |a & b| / |a | b|; 0.0 when both are empty.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

struct SimilarityMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // n x n, row-major

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

SimilarityMatrix similarity_matrix(std::span<const Fingerprint> fps, std::size_t workers = 0);
SimilarityMatrix similarity_matrix(std::span<const chem::Molecule> mols, int radius = kDefaultRadius,
                                   std::size_t n_bits = kDefaultBits, std::size_t workers = 0);

}  // namespace molfusion::fp
