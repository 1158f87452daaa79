// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "molfusion/random.hpp"
#include "molfusion/tensor.hpp"

namespace molfusion::testing {

// |a - n| / max(|a|, |n|, kGradFloor). The floor sits above the round-off of
// a central difference at h = 1e-5, which is what an exactly-zero gradient
// (an attention key bias, say) measures.
inline constexpr double kGradFloor = 1e-5;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares reverse-mode gradients of `loss` with central finite differences
// (step h) on `coords_per_tensor` random coordinates of every tensor in
// `params` (all coordinates when the tensor is smaller).
inline GradCheckResult check_gradients(std::vector<nn::Tensor> params,
                                       const std::function<nn::Tensor()>& loss, Rng& rng,
                                       std::size_t coords_per_tensor = 6, double h = 1e-5) {
  for (auto& p : params) p.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  GradCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto values = params[t].mutable_values();
    std::vector<std::size_t> coords;
    if (values.size() <= coords_per_tensor) {
      for (std::size_t i = 0; i < values.size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t k = 0; k < coords_per_tensor; ++k) coords.push_back(rng.uniform_index(values.size()));
    }
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss().item();
      values[i] = saved - h;
      const double down = loss().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[t][i], numeric));
      ++result.checked;
    }
  }
  return result;
}

inline nn::Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, bool param = true) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.normal();
  return param ? nn::Tensor::parameter(rows, cols, std::move(v))
               : nn::Tensor::from_values(rows, cols, std::move(v));
}

}  // namespace molfusion::testing
