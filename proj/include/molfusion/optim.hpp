// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "molfusion/parameters.hpp"

namespace molfusion::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update of `params` in place. `step` is the 1-based
// update count shared by all parameters.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               std::uint64_t step, const AdamOptions& opts);

class Adam {
 public:
  Adam(ParameterStore& store, AdamOptions opts);

  void step();
  std::uint64_t steps_taken() const { return step_; }

 private:
  ParameterStore& store_;
  AdamOptions opts_;
  std::vector<AdamMoments> moments_;
  std::uint64_t step_ = 0;
};

}  // namespace molfusion::nn
