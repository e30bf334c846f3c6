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

#include <cstdint>
#include <string>

#include "ttfuse/autograd.hpp"

namespace ttfuse {

// Trainable tensor with its Adam state. Copies deep-copy the value into a
// fresh leaf.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor value);
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  const std::string& name() const { return name_; }
  const ag::Var& var() const { return value_; }
  const Tensor& value() const { return value_.value(); }
  Tensor& mutable_value() { return value_.mutable_value(); }
  const Tensor& adam_m() const { return adam_m_; }
  const Tensor& adam_v() const { return adam_v_; }
  std::int64_t step_count() const { return step_count_; }

  void set_trainable(bool trainable);
  bool trainable() const { return value_.requires_grad(); }

 private:
  friend void adam_step(Parameter& param, double lr);

  std::string name_;
  ag::Var value_;
  Tensor adam_m_;
  Tensor adam_v_;
  std::int64_t step_count_ = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

// Bias-corrected Adam update; clears the gradient afterwards. An all-zero
// gradient advances the moments and the step count but leaves the value
// untouched. Throws Error(kInvalidArgument) if no gradient is present.
void adam_step(Parameter& param, double lr);

struct LrSchedule {
  double lr_max = 1e-4;
  double lr_min = 3e-7;
  int total_epochs = 50;
};

// lr_min + (lr_max - lr_min) * (1 + cos(pi * epoch / total_epochs)) / 2 for
// 0 <= epoch <= total_epochs.
double cosine_lr(const LrSchedule& schedule, int epoch);

}  // namespace ttfuse
