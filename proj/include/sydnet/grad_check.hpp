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
#ifndef SYDNET_GRAD_CHECK_HPP_
#define SYDNET_GRAD_CHECK_HPP_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sydnet/optim.hpp"

namespace syd {

struct GradCheckOptions {
  /// Step is rel_step * max(1, |x|).
  double rel_step = 1e-4;
  /// Denominator floor: error = |a - n| / max(|a|, |n|, abs_floor).
  double abs_floor = 1e-6;
};

struct GradCheckResult {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
  double grad_norm = 0.0;  ///< L2 norm of the analytic gradient
};

double relative_error(double analytic, double numeric, double abs_floor);

/**
 * Compares reverse-mode gradients of `loss` against central differences for
 * every element of every tensor in `inputs`. `loss` must be deterministic
 * (no dropout noise, no running-stat updates that feed back into it).
 */
std::vector<GradCheckResult> check_gradients(const std::function<Tensor<double>()>& loss,
                                             NamedTensors<double>& inputs, const GradCheckOptions& options = {});

}  // namespace syd

#endif  // SYDNET_GRAD_CHECK_HPP_
