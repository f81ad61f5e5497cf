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
#include "sydnet/optim.hpp"

#include <cmath>

#include "sydnet/error.hpp"

namespace syd {

SgdState::SgdState(double lr, std::size_t step, double decay)
    : learning_rate(lr), step_epochs(step), decay_factor(decay) {
  if (!(lr > 0.0)) throw ParameterError("learning rate must be positive, got " + std::to_string(lr));
  if (step == 0) throw ParameterError("learning-rate step must be a positive number of epochs");
  if (!(decay > 0.0 && decay < 1.0)) throw ParameterError("decay factor must lie in (0, 1), got " + std::to_string(decay));
}

double SgdState::effective_lr(std::size_t at_epoch) const {
  const auto steps = at_epoch / step_epochs;
  double lr = learning_rate;
  // For decays like 0.1, dividing by the integral reciprocal gives the correctly
  // rounded value (0.007 -> 7e-4 -> 7e-5); multiplying by 0.1 does not.
  const double reciprocal = std::round(1.0 / decay_factor);
  const bool integral = std::abs(1.0 / decay_factor - reciprocal) < 1e-9;
  for (std::size_t i = 0; i < steps; ++i) {
    if (integral) {
      lr /= reciprocal;
    } else {
      lr *= decay_factor;
    }
  }
  return lr;
}

template <typename T>
void sgd_step(NamedTensors<T>& params, const SgdState& state) {
  for (auto& p : params) {
    if (!p.tensor.has_grad()) throw OptimizerError("parameter '" + p.name + "' has no gradient");
  }
  const T lr = static_cast<T>(state.effective_lr());
  for (auto& p : params) {
    auto data = p.tensor.mutable_data();
    const auto grad = p.tensor.grad();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * grad[i];
  }
}

template <typename T>
void zero_grad(NamedTensors<T>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

template void sgd_step(NamedTensors<float>&, const SgdState&);
template void sgd_step(NamedTensors<double>&, const SgdState&);
template void zero_grad(NamedTensors<float>&);
template void zero_grad(NamedTensors<double>&);

}  // namespace syd
