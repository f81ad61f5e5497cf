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
#ifndef SYDNET_HEAD_CHECK_HPP_
#define SYDNET_HEAD_CHECK_HPP_

#include <cstdint>
#include <vector>

#include "sydnet/attention.hpp"
#include "sydnet/grad_check.hpp"

namespace syd {

/// Tiny random 64-bit PbA head checked in eval mode.
struct HeadCheckSpec {
  std::size_t n = 3;
  std::size_t h = 2;
  std::size_t w = 2;
  std::size_t c = 8;
  std::size_t c_a = 4;
  std::size_t num_classes = 3;
  std::size_t batch = 2;
  std::uint64_t seed = 0;
  bool include_self = true;
  SpatialActivation sa_activation = SpatialActivation::kSoftmax;
  /// Small step: channel max pooling has kinks where two channels nearly tie.
  GradCheckOptions options{1e-5, 1e-6};
};

/// n - 1 off-centre uniform tiles plus the full grid. Centred patches alone
/// all share the map's channel means on a 2x2 map, which hides channel
/// attention from the check.
PatchSet check_patch_set(std::size_t n);

/// One result per parameter tensor plus "input.f" for the backbone map.
std::vector<GradCheckResult> head_gradient_check(const HeadCheckSpec& spec);

}  // namespace syd

#endif  // SYDNET_HEAD_CHECK_HPP_
