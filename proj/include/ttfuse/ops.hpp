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

#include "ttfuse/autograd.hpp"

// Differentiable primitives. Every op validates shapes and throws
// Error(kShapeMismatch) naming the offending shapes.
namespace ttfuse::ops {

using ag::Var;

enum class Activation { kRelu, kSigmoid };
enum class Reduction { kGlobalAvgPerChannel, kChannelMeanMap, kChannelMaxMap };

// kernel: (C_out, C_in, k, k); bias: (1, C_out, 1, 1).
Var conv2d(const Var& input, const Var& kernel, const Var& bias, int stride,
           int padding);
// Stride 1 with padding (k - 1) / 2; rejects even k.
Var conv2d_same(const Var& input, const Var& kernel, const Var& bias);

Var activation(const Var& input, Activation kind);
Var relu(const Var& input);
Var sigmoid(const Var& input);

// kGlobalAvgPerChannel -> (N,C,1,1); the map reductions -> (N,1,H,W).
// Max routes its gradient to the first maximal channel.
Var reduce(const Var& input, Reduction kind);

Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& input, int begin, int count);
Var reshape(const Var& input, Shape shape);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);
Var scale(const Var& input, double factor);
Var add_scalar(const Var& input, double value);
Var square(const Var& input);
// d/dx sqrt(x) is taken as 0 where the output is exactly 0.
Var sqrt(const Var& input);

// Per-channel broadcasts: `per_channel` is (N,C,1,1).
Var add_channel(const Var& input, const Var& per_channel);
Var sub_channel(const Var& input, const Var& per_channel);
Var mul_channel(const Var& input, const Var& per_channel);
Var div_channel(const Var& input, const Var& per_channel);
// `map` is (N,1,H,W), broadcast over channels.
Var mul_spatial(const Var& input, const Var& map);

// exp(x/T) / (exp(x/T) + exp(y/T)) elementwise, clamped to
// [kWeightFloor, 1 - kWeightFloor]. The denominator is formed symmetrically,
// so pair_softmax(y, x) is bitwise the partner weight of pair_softmax(x, y).
inline constexpr double kWeightFloor = 1e-13;
Var pair_softmax(const Var& x, const Var& y, double temperature);

// w1 * a + w2 * b + (b1 + b2); weights and biases are (N,C,1,1).
Var weighted_fuse(const Var& a, const Var& b, const Var& w1, const Var& w2,
                  const Var& b1, const Var& b2);

Var sum(const Var& input);
Var mean(const Var& input);

// Scalar losses against a constant target of the same shape.
Var l1_loss(const Var& pred, const Tensor& target);
// Mean over samples of (1 - mean local SSIM), 11x11 Gaussian window
// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1. Images need H, W >= 11.
Var ssim_loss(const Var& pred, const Tensor& target);

}  // namespace ttfuse::ops
