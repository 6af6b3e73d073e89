// Copyright 2026 The tmcast Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TMCAST_NN_AUTOGRAD_HPP
#define TMCAST_NN_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <vector>

#include "tmcast/nn/tensor.hpp"

namespace tmcast::nn {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

/// Handle to a node of the define-by-run graph. Leaves are parameters or
/// constants; interior nodes are produced by the ops in ops.hpp.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::int64_t dim(int i) const { return node_->value.dim(i); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Tensor(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Reverse-mode sweep from a scalar root. Gradients accumulate into leaves.
void backward(const Var& root);

bool grad_enabled();

/// Disables graph recording in its scope (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an interior node. The backward function is dropped when no input
/// requires a gradient or recording is disabled.
Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Grad buffer of input i of `self`, or nullptr when that input needs none.
Tensor* input_grad(Node& self, std::size_t i);

}  // namespace tmcast::nn

#endif  // TMCAST_NN_AUTOGRAD_HPP
