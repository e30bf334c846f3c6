// Copyright 2026 The ttfuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ttfuse/tensor.hpp"

namespace ttfuse::ag {

struct Node;
using BackwardFn = std::function<void(Node& self)>;

// One vertex of the recorded computation. `value.grad` holds dL/d(value)
// once backward has reached this node.
struct Node {
  Tensor value;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

// Handle to a node. Copies share the node; use Tensor copies for values.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var leaf(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->value.requires_grad(); }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Seeds d(root)/d(root) = 1 and propagates through every recorded node.
// The root must hold a single element.
void backward(const Var& root);

bool grad_enabled();

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

// Wraps an op result. The backward closure is kept only when recording is
// enabled and some input requires a gradient.
Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn);

// Gradient buffer of input `i` of `self`, or an empty span when that input
// does not require a gradient.
std::span<double> input_grad(Node& self, std::size_t i);

}  // namespace ttfuse::ag
