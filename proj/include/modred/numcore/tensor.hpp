/*
 * Copyright 2026 The modred Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file tensor.hpp
 * @brief Dense binary64 tensor handle with reverse-mode differentiation.
 *
 * A Tensor is a shared handle onto a graph node. Leaves created with
 * requires_grad carry a gradient accumulator; every op whose inputs require
 * gradients records a backward closure on its result. The graph lives exactly
 * as long as some handle references its root, so a training step that drops
 * its loss handle after backward() frees the whole graph.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "modred/errors.hpp"

namespace modred::nc {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ')';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  // Allocated on first use (backward or an explicit write); data.size()
  // once allocated. An unallocated buffer reads as all zeros.
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into parents' grads.
  std::function<void(Node& self)> backward;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

inline void check_finite(std::string_view op, std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value produced by ") + std::string(op));
  }
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("tensor of shape " + shape_str(shape) + " cannot hold " +
                       std::to_string(values.size()) + " values");
    }
    detail::check_finite("tensor construction", values);
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->data = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) { return from({}, {v}, requires_grad); }

  // Result of an op. Parents and the backward closure are only kept when
  // some parent participates in differentiation.
  static Tensor make_result(std::string_view op, Shape shape, std::vector<double> values,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward) {
    detail::check_finite(op, values);
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->data = std::move(values);
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.node_);
      n->backward = std::move(backward);
    }
    return Tensor(std::move(n));
  }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_->parents.empty(); }

  std::span<const double> data() const { return node_->data; }
  std::vector<double> values() const { return node_->data; }

  // Direct writes are only for leaves (parameters, inputs); optimizers and
  // finite-difference probes use this.
  std::span<double> mutable_data() {
    if (!is_leaf()) throw ShapeError("mutable_data() on a non-leaf tensor");
    return node_->data;
  }

  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return node_ && !node_->grad.empty(); }

  void zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  double item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  double at(std::size_t i) const { return node_->data.at(i); }
  double at(std::size_t i, std::size_t j) const {
    if (rank() != 2) throw ShapeError("at(i, j) on non-matrix");
    return node_->data.at(i * node_->shape[1] + j);
  }

  // Copy of the values with no graph attached.
  Tensor detach(bool requires_grad = false) const { return from(shape(), values(), requires_grad); }

  // Reverse-mode sweep from this scalar. Leaf gradients accumulate across
  // calls; interior gradients are recomputed from zero each call.
  void backward() const {
    if (numel() != 1) throw ShapeError("backward() requires a scalar root, got " + shape_str(shape()));
    if (!node_->requires_grad) return;
    std::vector<detail::Node*> order;
    {
      std::unordered_set<detail::Node*> seen;
      std::vector<std::pair<detail::Node*, std::size_t>> stack;
      stack.emplace_back(node_.get(), 0);
      seen.insert(node_.get());
      while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
          detail::Node* p = n->parents[next++].get();
          if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
          order.push_back(n);
          stack.pop_back();
        }
      }
    }
    for (auto* n : order) {
      if (!n->parents.empty()) n->grad.assign(n->data.size(), 0.0);
    }
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward) (*it)->backward(**it);
    }
  }

  detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

}  // namespace modred::nc
