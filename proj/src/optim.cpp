// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "molfusion/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace molfusion::nn {

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               std::uint64_t step, const AdamOptions& opts) {
  if (grads.size() != params.size()) throw ShapeMismatch("adam_step: gradient size mismatch");
  if (step == 0) throw std::invalid_argument("adam_step: step is 1-based");
  if (moments.m.empty()) {
    moments.m.assign(params.size(), 0.0);
    moments.v.assign(params.size(), 0.0);
  }
  const double correction1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    moments.m[i] = opts.beta1 * moments.m[i] + (1.0 - opts.beta1) * g;
    moments.v[i] = opts.beta2 * moments.v[i] + (1.0 - opts.beta2) * g * g;
    const double m_hat = moments.m[i] / correction1;
    const double v_hat = moments.v[i] / correction2;
    params[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
  }
}

Adam::Adam(ParameterStore& store, AdamOptions opts)
    : store_(store), opts_(opts), moments_(store.size()) {}

void Adam::step() {
  ++step_;
  auto& params = store_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_step(params[i].tensor.mutable_values(), params[i].tensor.grad(), moments_[i], step_, opts_);
  }
}

}  // namespace molfusion::nn
