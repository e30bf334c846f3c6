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

#include "ttfuse/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ttfuse/error.hpp"

namespace ttfuse {

GradCheckReport grad_check(const std::function<ag::Var(const ag::Var&)>& fn,
                           const Tensor& input, double tolerance, double step) {
  Tensor start(input.shape(), std::vector<double>(input.data().begin(),
                                                  input.data().end()));
  ag::Var x = ag::Var::leaf(start);
  ag::Var y = fn(x);
  if (y.value().numel() != 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "grad_check: function must be scalar-valued");
  }
  ag::backward(y);
  std::vector<double> analytic(input.numel(), 0.0);
  if (x.value().has_grad()) {
    const auto g = x.value().grad();
    std::copy(g.begin(), g.end(), analytic.begin());
  }

  auto evaluate = [&](const Tensor& at) {
    ag::NoGradGuard guard;
    return fn(ag::Var::constant(at)).value()[0];
  };

  GradCheckReport report;
  Tensor probe = start;
  for (std::size_t i = 0; i < input.numel(); ++i) {
    const double original = probe[i];
    probe[i] = original + step;
    const double up = evaluate(probe);
    probe[i] = original - step;
    const double down = evaluate(probe);
    probe[i] = original;
    const double numeric = (up - down) / (2.0 * step);
    const double scale =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    double error = std::abs(analytic[i] - numeric) / scale;
    if (!std::isfinite(error)) error = INFINITY;
    if (i == 0 || error > report.worst_error) {
      report.worst_error = error;
      report.worst_index = i;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
  }
  report.passed = report.worst_error < tolerance;
  return report;
}

}  // namespace ttfuse
