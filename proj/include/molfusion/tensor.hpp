// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace molfusion::nn {

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class NotScalar : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {
struct Node;
}

// Dense row-major float64 matrix that records the operations producing it.
// Vectors are 1 x n rows and scalars are 1 x 1. Copies share the underlying
// storage; use detach() for an independent value copy.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor full(std::size_t rows, std::size_t cols, double value);
  static Tensor from_values(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor scalar(double value);
  // Leaf that accumulates gradients.
  static Tensor parameter(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  // Zero-filled for parameters that were never reached by backward().
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Reverse-mode sweep from this scalar; leaf gradients accumulate.
  void backward() const;
  Tensor detach() const;

  bool shares_storage_with(const Tensor& other) const { return node_ == other.node_; }

  // Internal: op implementations build nodes directly.
  explicit Tensor(std::shared_ptr<detail::Node> node);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// Same shape, or b a 1 x cols row broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
// out[dst[i]] += a[i]; out has n_out rows.
Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> dst, std::size_t n_out);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Column means over rows: n x d -> 1 x d.
Tensor mean_rows(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// mean((pred - target)^2) over all entries
Tensor mse(const Tensor& pred, const Tensor& target);
// mean over rows of -log softmax(logits)[row, target]
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

}  // namespace molfusion::nn
