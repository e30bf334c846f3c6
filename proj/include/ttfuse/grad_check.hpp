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

#include <cstddef>
#include <functional>

#include "ttfuse/autograd.hpp"

namespace ttfuse {

struct GradCheckReport {
  bool passed = true;
  double worst_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;

  explicit operator bool() const { return passed; }
};

// Compares backward() of a scalar-valued `fn` against central differences.
// The per-element error is |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-6); every element must fall below `tolerance`.
GradCheckReport grad_check(const std::function<ag::Var(const ag::Var&)>& fn,
                           const Tensor& input, double tolerance,
                           double step = 1e-5);

}  // namespace ttfuse
