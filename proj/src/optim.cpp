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

#include "ttfuse/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ttfuse/error.hpp"

namespace ttfuse {

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)),
      value_(ag::Var::leaf(std::move(value))),
      adam_m_(value_.shape()),
      adam_v_(value_.shape()) {}

Parameter::Parameter(const Parameter& other)
    : name_(other.name_),
      adam_m_(other.adam_m_),
      adam_v_(other.adam_v_),
      step_count_(other.step_count_) {
  if (other.value_.defined()) {
    Tensor copy(other.value().shape(),
                std::vector<double>(other.value().data().begin(),
                                    other.value().data().end()));
    value_ = other.trainable() ? ag::Var::leaf(std::move(copy))
                               : ag::Var::constant(std::move(copy));
  }
}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) {
    Parameter copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Parameter::set_trainable(bool trainable) {
  value_.mutable_value().set_requires_grad(trainable);
  if (!trainable) value_.mutable_value().clear_grad();
}

void adam_step(Parameter& param, double lr) {
  Tensor& value = param.mutable_value();
  if (!value.has_grad()) {
    throw Error(ErrorKind::kInvalidArgument,
                "adam_step: parameter '" + param.name_ + "' has no gradient");
  }
  const auto grad = value.grad();
  const bool all_zero =
      std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; });
  ++param.step_count_;
  const double t = static_cast<double>(param.step_count_);
  const double correction1 = 1.0 - std::pow(kAdamBeta1, t);
  const double correction2 = 1.0 - std::pow(kAdamBeta2, t);
  auto m = param.adam_m_.data();
  auto v = param.adam_v_.data();
  auto x = value.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * grad[i];
    v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
    if (all_zero) continue;
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    x[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
  }
  value.clear_grad();
}

double cosine_lr(const LrSchedule& schedule, int epoch) {
  if (schedule.total_epochs < 1 || epoch < 0 || epoch > schedule.total_epochs) {
    throw Error(ErrorKind::kInvalidArgument,
                "cosine_lr: epoch " + std::to_string(epoch) +
                    " outside [0, " + std::to_string(schedule.total_epochs) +
                    "]");
  }
  if (epoch == 0) return schedule.lr_max;
  if (epoch == schedule.total_epochs) return schedule.lr_min;
  const double phase = std::numbers::pi * epoch / schedule.total_epochs;
  return schedule.lr_min +
         0.5 * (schedule.lr_max - schedule.lr_min) * (1.0 + std::cos(phase));
}

}  // namespace ttfuse
