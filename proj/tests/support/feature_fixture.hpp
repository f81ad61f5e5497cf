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
#ifndef SYDNET_TESTS_SUPPORT_FEATURE_FIXTURE_HPP_
#define SYDNET_TESTS_SUPPORT_FEATURE_FIXTURE_HPP_

#include <random>

#include "sydnet/backbone.hpp"

namespace syd::testing {

/// Non-negative feature maps where class k lights up channel block k.
inline FeatureFile class_features(std::size_t per_class, std::size_t classes, FeatureGeometry g,
                                  std::uint64_t seed, double signal = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  FeatureFile file;
  file.geometry = g;
  const std::size_t block = std::max<std::size_t>(1, g.c / classes);
  for (std::size_t i = 0; i < per_class * classes; ++i) {
    FeatureRecord r;
    r.label = static_cast<std::uint32_t>(i % classes);
    r.values.resize(g.values());
    for (std::size_t v = 0; v < r.values.size(); ++v) {
      const std::size_t ch = v % g.c;
      const bool on = ch / block == r.label;
      r.values[v] = static_cast<float>(noise(rng) + (on ? signal : 0.0));
    }
    file.records.push_back(std::move(r));
  }
  return file;
}

}  // namespace syd::testing

#endif  // SYDNET_TESTS_SUPPORT_FEATURE_FIXTURE_HPP_
