/**
 * Copyright 2026 The sydnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "sydnet/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace syd {

double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<GradCheckResult> check_gradients(const std::function<Tensor<double>()>& loss,
                                             NamedTensors<double>& inputs, const GradCheckOptions& options) {
  for (auto& in : inputs) {
    in.tensor.set_requires_grad(true);
    in.tensor.zero_grad();
  }
  loss().backward();

  std::vector<GradCheckResult> results;
  for (auto& in : inputs) {
    GradCheckResult r;
    r.name = in.name;
    r.elements = in.tensor.numel();
    std::vector<double> analytic(in.tensor.numel(), 0.0);
    if (in.tensor.has_grad()) std::copy(in.tensor.grad().begin(), in.tensor.grad().end(), analytic.begin());
    for (double g : analytic) r.grad_norm += g * g;
    r.grad_norm = std::sqrt(r.grad_norm);
    auto data = in.tensor.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double original = data[i];
      const double h = options.rel_step * std::max(1.0, std::abs(original));
      data[i] = original + h;
      const double up = loss().item();
      data[i] = original - h;
      const double down = loss().item();
      data[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric, options.abs_floor);
      if (i == 0 || err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_index = i;
        r.analytic = analytic[i];
        r.numeric = numeric;
      }
    }
    results.push_back(r);
  }
  return results;
}

}  // namespace syd
