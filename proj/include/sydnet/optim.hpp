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
#ifndef SYDNET_OPTIM_HPP_
#define SYDNET_OPTIM_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "sydnet/tensor.hpp"

namespace syd {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using NamedTensors = std::vector<NamedTensor<T>>;

/// Plain SGD with a step-decay schedule.
struct SgdState {
  double learning_rate = 0.007;
  std::size_t step_epochs = 50;
  double decay_factor = 0.1;
  std::size_t epoch = 0;

  SgdState() = default;
  SgdState(double lr, std::size_t step, double decay);

  /// learning_rate * decay_factor^floor(epoch / step_epochs)
  double effective_lr(std::size_t at_epoch) const;
  double effective_lr() const { return effective_lr(epoch); }
};

/// p <- p - lr(epoch) * grad(p) for every parameter. Throws OptimizerError
/// naming the first parameter that has no gradient buffer.
template <typename T>
void sgd_step(NamedTensors<T>& params, const SgdState& state);

template <typename T>
void zero_grad(NamedTensors<T>& params);

}  // namespace syd

#endif  // SYDNET_OPTIM_HPP_
