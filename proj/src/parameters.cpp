// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "molfusion/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace molfusion::nn {

Tensor& ParameterStore::add(std::string name, std::size_t rows, std::size_t cols,
                            std::vector<double> values) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(Parameter{std::move(name), Tensor::parameter(rows, cols, std::move(values))});
  return params_.back().tensor;
}

Tensor& ParameterStore::add_xavier(std::string name, std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> values(rows * cols);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return add(std::move(name), rows, cols, std::move(values));
}

Tensor& ParameterStore::add_constant(std::string name, std::size_t rows, std::size_t cols,
                                     double value) {
  return add(std::move(name), rows, cols, std::vector<double>(rows * cols, value));
}

bool ParameterStore::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

const Tensor& ParameterStore::get(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("unknown parameter: " + std::string(name));
}

Tensor& ParameterStore::get(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> ParameterStore::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void ParameterStore::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].tensor.mutable_values();
    if (values[i].size() != dst.size()) {
      throw std::invalid_argument("snapshot shape mismatch for " + params_[i].name);
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace molfusion::nn
