// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "molfusion/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace molfusion::nn {

namespace detail {

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

thread_local bool t_grad_enabled = true;

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeMismatch(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                      shape_str(b));
}

NodePtr make_node(std::size_t rows, std::size_t cols, std::vector<double> value) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(value);
  return node;
}

// Builds the result node; records parents and the backward rule only when a
// parent needs gradients and recording is enabled.
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> value,
                   std::initializer_list<Tensor> parents, std::function<void(Node&)> backprop) {
  auto node = make_node(rows, cols, std::move(value));
  if (t_grad_enabled) {
    for (const Tensor& p : parents) {
      if (p.requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
  }
  if (node->requires_grad) {
    node->leaf = false;
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backprop = std::move(backprop);
  }
  return Tensor(node);
}

Tensor make_result_n(std::size_t rows, std::size_t cols, std::vector<double> value,
                     std::span<const Tensor> parents, std::function<void(Node&)> backprop) {
  auto node = make_node(rows, cols, std::move(value));
  if (t_grad_enabled) {
    node->requires_grad = std::any_of(parents.begin(), parents.end(),
                                      [](const Tensor& p) { return p.requires_grad(); });
  }
  if (node->requires_grad) {
    node->leaf = false;
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backprop = std::move(backprop);
  }
  return Tensor(node);
}

// Gradient sink for a parent; null when the parent does not need gradients.
double* sink(const NodePtr& p) { return p->requires_grad ? p->grad_buffer().data() : nullptr; }

}  // namespace

Tensor::Tensor() : node_(make_node(0, 0, {})) {}
Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor(make_node(rows, cols, std::vector<double>(rows * cols, 0.0)));
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  return Tensor(make_node(rows, cols, std::vector<double>(rows * cols, value)));
}

Tensor Tensor::from_values(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) {
    throw ShapeMismatch("from_values: " + std::to_string(values.size()) + " values for shape " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Tensor(make_node(rows, cols, std::move(values)));
}

Tensor Tensor::scalar(double value) { return from_values(1, 1, {value}); }

Tensor Tensor::parameter(std::size_t rows, std::size_t cols, std::vector<double> values) {
  Tensor t = from_values(rows, cols, std::move(values));
  t.node_->requires_grad = true;
  t.node_->grad_buffer();
  return t;
}

std::size_t Tensor::rows() const { return node_->rows; }
std::size_t Tensor::cols() const { return node_->cols; }
std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::at(std::size_t r, std::size_t c) const {
  if (r >= rows() || c >= cols()) throw IndexOutOfRange("Tensor::at out of range");
  return node_->value[r * cols() + c];
}

double Tensor::item() const {
  if (size() != 1) throw NotScalar("item() on a " + shape_str(*this) + " tensor");
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

std::span<const double> Tensor::grad() const { return node_->grad_buffer(); }
std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }

void Tensor::zero_grad() {
  auto& g = node_->grad_buffer();
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(make_node(rows(), cols(), node_->value)); }

void Tensor::backward() const {
  if (size() != 1) throw NotScalar("backward() requires a scalar, got " + shape_str(*this));
  if (!node_->requires_grad) return;

  // Post-order DFS gives a topological order of the recorded graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->leaf) {
      auto& g = n->grad_buffer();
      std::fill(g.begin(), g.end(), 0.0);
    }
  }
  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      const double* brow = bv.data() + p * m;
      double* orow = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += x * brow[j];
    }
  }
  return make_result(n, m, std::move(out), {a, b}, [n, k, m](Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    const double* g = self.grad.data();
    if (double* ga = sink(pa)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * pb->value[p * m + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (double* gb = sink(pb)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double x = pa->value[i * k + p];
          if (x == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += x * g[i * m + j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  }
  return make_result(c, r, std::move(out), {a}, [r, c](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
      }
    }
  });
}

namespace {

Tensor add_or_sub(const Tensor& a, const Tensor& b, double sign, const char* op) {
  const bool same = a.rows() == b.rows() && a.cols() == b.cols();
  const bool row_broadcast = b.rows() == 1 && b.cols() == a.cols();
  if (!same && !row_broadcast) mismatch(op, a, b);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += sign * bv[same ? i * c + j : j];
  }
  return make_result(r, c, std::move(out), {a, b}, [r, c, same, sign](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      for (std::size_t i = 0; i < r * c; ++i) ga[i] += self.grad[i];
    }
    if (double* gb = sink(self.parents[1])) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gb[same ? i * c + j : j] += sign * self.grad[i * c + j];
      }
    }
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [deriv](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      const auto& x = self.parents[0]->value;
      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += self.grad[i] * deriv(x[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_or_sub(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_or_sub(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a, b}, [](Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (double* ga = sink(pa)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * pb->value[i];
    }
    if (double* gb = sink(pb)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * pa->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != r) mismatch("concat_cols", parts[0], p);
    offsets.push_back(total);
    total += p.cols();
  }
  std::vector<double> out(r * total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    const std::size_t c = parts[k].cols();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(pv.data() + i * c, c, out.data() + i * total + offsets[k]);
    }
  }
  return make_result_n(r, total, std::move(out), parts, [r, total, offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      double* gp = sink(self.parents[k]);
      if (!gp) continue;
      const std::size_t c = self.parents[k]->cols;
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += self.grad[i * total + offsets[k] + j];
      }
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  std::vector<double> out;
  for (const Tensor& p : parts) {
    if (p.cols() != c) mismatch("concat_rows", parts[0], p);
    total += p.rows();
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return make_result_n(total, c, std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (const auto& p : self.parents) {
      if (double* gp = sink(p)) {
        for (std::size_t i = 0; i < p->value.size(); ++i) gp[i] += self.grad[offset + i];
      }
      offset += p->value.size();
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) {
    throw IndexOutOfRange("slice_cols: [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") exceeds " + std::to_string(a.cols()));
  }
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(a.values().data() + i * c + begin, count, out.data() + i * count);
  }
  return make_result(r, count, std::move(out), {a}, [r, c, begin, count](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < count; ++j) ga[i * c + begin + j] += self.grad[i * count + j];
      }
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  const std::size_t c = a.cols();
  std::vector<double> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) {
      throw IndexOutOfRange("gather_rows: row " + std::to_string(rows[i]) + " of " +
                            std::to_string(a.rows()));
    }
    std::copy_n(a.values().data() + rows[i] * c, c, out.data() + i * c);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result(rows.size(), c, std::move(out), {a}, [idx, c](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < c; ++j) ga[idx[i] * c + j] += self.grad[i * c + j];
      }
    }
  });
}

Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> dst, std::size_t n_out) {
  if (dst.size() != a.rows()) {
    throw ShapeMismatch("scatter_add_rows: " + std::to_string(dst.size()) + " targets for " +
                        std::to_string(a.rows()) + " rows");
  }
  const std::size_t c = a.cols();
  std::vector<double> out(n_out * c, 0.0);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i] >= n_out) throw IndexOutOfRange("scatter_add_rows: target out of range");
    for (std::size_t j = 0; j < c; ++j) out[dst[i] * c + j] += a.values()[i * c + j];
  }
  std::vector<std::size_t> idx(dst.begin(), dst.end());
  return make_result(n_out, c, std::move(out), {a}, [idx, c](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[idx[i] * c + j];
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_result(1, 1, {total}, {a}, [](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) ga[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeMismatch("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_rows(const Tensor& a) {
  if (a.rows() == 0) throw ShapeMismatch("mean_rows of a tensor with no rows");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j] += a.values()[i * c + j];
  }
  const double inv = 1.0 / static_cast<double>(r);
  for (double& v : out) v *= inv;
  return make_result(1, c, std::move(out), {a}, [r, c, inv](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j] * inv;
      }
    }
  });
}

namespace {

std::vector<double> row_softmax(std::span<const double> x, std::size_t r, std::size_t c) {
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = x.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = std::exp(row[j] - mx);
      z += out[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  return out;
}

}  // namespace

Tensor softmax_rows(const Tensor& a) {
  if (a.cols() == 0) throw ShapeMismatch("softmax_rows: zero columns");
  const std::size_t r = a.rows(), c = a.cols();
  return make_result(r, c, row_softmax(a.values(), r, c), {a}, [r, c](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * self.value[i * c + j];
        for (std::size_t j = 0; j < c; ++j) {
          ga[i * c + j] += self.value[i * c + j] * (self.grad[i * c + j] - dot);
        }
      }
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  if (a.cols() == 0) throw ShapeMismatch("log_softmax_rows: zero columns");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = a.values().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
  }
  return make_result(r, c, std::move(out), {a}, [r, c](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += self.grad[i * c + j];
        for (std::size_t j = 0; j < c; ++j) {
          ga[i * c + j] += self.grad[i * c + j] - std::exp(self.value[i * c + j]) * total;
        }
      }
    }
  });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t r = a.rows(), c = a.cols();
  if (gain.rows() != 1 || gain.cols() != c) mismatch("layer_norm gain", a, gain);
  if (bias.rows() != 1 || bias.cols() != c) mismatch("layer_norm bias", a, bias);
  std::vector<double> xhat(r * c);
  std::vector<double> inv_std(r);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = a.values().data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (row[j] - mu) * inv_std[i];
      out[i * c + j] = gain.values()[j] * xhat[i * c + j] + bias.values()[j];
    }
  }
  return make_result(r, c, std::move(out), {a, gain, bias}, [r, c, xhat, inv_std](Node& self) {
    const auto& g_node = self.parents[1];
    double* ga = sink(self.parents[0]);
    double* gg = sink(g_node);
    double* gb = sink(self.parents[2]);
    for (std::size_t i = 0; i < r; ++i) {
      double mean_d = 0.0, mean_dx = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double d = self.grad[i * c + j] * g_node->value[j];
        mean_d += d;
        mean_dx += d * xhat[i * c + j];
      }
      mean_d /= static_cast<double>(c);
      mean_dx /= static_cast<double>(c);
      for (std::size_t j = 0; j < c; ++j) {
        const double g = self.grad[i * c + j];
        if (ga) {
          const double d = g * g_node->value[j];
          ga[i * c + j] += inv_std[i] * (d - mean_d - xhat[i * c + j] * mean_dx);
        }
        if (gg) gg[j] += g * xhat[i * c + j];
        if (gb) gb[j] += g;
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add(matmul(x, weight), bias);
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) mismatch("mse", pred, target);
  if (pred.size() == 0) throw ShapeMismatch("mse of empty tensors");
  const std::size_t n = pred.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred.values()[i] - target.values()[i];
    total += d * d;
  }
  const double inv = 1.0 / static_cast<double>(n);
  return make_result(1, 1, {total * inv}, {pred, target}, [n, inv](Node& self) {
    const auto& p = self.parents[0];
    const auto& t = self.parents[1];
    double* gp = sink(p);
    double* gt = sink(t);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = 2.0 * (p->value[i] - t->value[i]) * inv * self.grad[0];
      if (gp) gp[i] += d;
      if (gt) gt[i] -= d;
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  const std::size_t r = logits.rows(), c = logits.cols();
  if (targets.size() != r) {
    throw ShapeMismatch("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(r) + " rows");
  }
  if (r == 0) throw ShapeMismatch("cross_entropy over zero rows");
  for (std::size_t t : targets) {
    if (t >= c) {
      throw IndexOutOfRange("cross_entropy: target " + std::to_string(t) + " >= classes " +
                            std::to_string(c));
    }
  }
  const auto probs = row_softmax(logits.values(), r, c);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = logits.values().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    total += mx + std::log(z) - row[targets[i]];
  }
  const double inv = 1.0 / static_cast<double>(r);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_result(1, 1, {total * inv}, {logits}, [r, c, inv, probs, tgt](Node& self) {
    if (double* ga = sink(self.parents[0])) {
      const double g = self.grad[0] * inv;
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          ga[i * c + j] += g * (probs[i * c + j] - (j == tgt[i] ? 1.0 : 0.0));
        }
      }
    }
  });
}

}  // namespace molfusion::nn
