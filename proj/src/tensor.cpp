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

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ttfuse/autograd.hpp"
#include "ttfuse/error.hpp"
#include "ttfuse/tensor.hpp"

namespace ttfuse {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kShapeMismatch: return "shape mismatch";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kNotFound: return "not found";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kUnsupportedFormat: return "unsupported format";
    case ErrorKind::kTruncated: return "truncated data";
    case ErrorKind::kCorrupt: return "corrupt data";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kBadChecksum: return "bad checksum";
    case ErrorKind::kBadVersion: return "unsupported version";
    case ErrorKind::kEmptyDataset: return "empty dataset";
    case ErrorKind::kNumeric: return "numeric failure";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kConfig:
      return 1;
    case ErrorKind::kNumeric:
      return 3;
    default:
      return 2;
  }
}

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" +
         std::to_string(h) + "x" + std::to_string(w);
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(shape), data_(shape.numel(), fill) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "negative tensor extent " + shape.str());
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape.numel()) {
    throw Error(ErrorKind::kShapeMismatch,
                "tensor of shape " + shape.str() + " needs " +
                    std::to_string(shape.numel()) + " elements, got " +
                    std::to_string(data_.size()));
  }
}

std::span<double> Tensor::ensure_grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0);
  return *grad_;
}

std::span<const double> Tensor::grad() const {
  if (!grad_) return {};
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace ag {
namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

Var Var::constant(Tensor value) {
  value.set_requires_grad(false);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::leaf(Tensor value) {
  value.set_requires_grad(true);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  const bool needs =
      g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const Var& v) { return v.defined() && v.requires_grad(); });
  value.set_requires_grad(needs);
  node->value = std::move(value);
  if (needs) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.shared());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

std::span<double> input_grad(Node& self, std::size_t i) {
  auto& in = self.inputs[i];
  if (!in || !in->value.requires_grad()) return {};
  return in->value.ensure_grad();
}

void backward(const Var& root) {
  if (!root.defined() || root.value().numel() != 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "backward needs a single-element root");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->value.requires_grad() && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->value.ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->value.has_grad()) node->backward(*node);
  }
}

}  // namespace ag
}  // namespace ttfuse
