// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "molfusion/random.hpp"
#include "molfusion/tensor.hpp"

namespace molfusion::nn {

struct Parameter {
  std::string name;
  Tensor tensor;
};

// Ordered registry of trainable tensors. Names are unique and double as the
// checkpoint keys; registration order is the serialization order.
class ParameterStore {
 public:
  Tensor& add(std::string name, std::size_t rows, std::size_t cols, std::vector<double> values);
  // Uniform(-a, a) with a = sqrt(6 / (rows + cols)).
  Tensor& add_xavier(std::string name, std::size_t rows, std::size_t cols, Rng& rng);
  Tensor& add_constant(std::string name, std::size_t rows, std::size_t cols, double value);

  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  bool contains(std::string_view name) const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  // Deep copy of all values, in registration order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<Parameter> params_;
};

}  // namespace molfusion::nn
