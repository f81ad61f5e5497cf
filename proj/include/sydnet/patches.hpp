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
#ifndef SYDNET_PATCHES_HPP_
#define SYDNET_PATCHES_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sydnet/tensor.hpp"

namespace syd {

/// Rectangle on the upsampled feature grid, in cells.
struct PatchSpec {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t dw = 0;
  std::size_t dh = 0;

  bool operator==(const PatchSpec&) const = default;
};

/**
 * Hybrid patch set: a uniform non-overlapping a x a tiling of the grid plus
 * `hierarchical` concentric squares growing in equal steps up to the full
 * grid. Feature order is uniform (row-major) followed by hierarchical
 * (smallest first).
 */
struct PatchSet {
  std::string name;
  std::size_t grid = 0;
  std::vector<PatchSpec> uniform;
  std::vector<PatchSpec> hierarchical;

  std::size_t n() const { return uniform.size() + hierarchical.size(); }
  std::vector<PatchSpec> all() const;
};

/// (grid / a)^2 disjoint a x a squares in row-major order. Requires a | grid.
std::vector<PatchSpec> uniform_grid(std::size_t grid, std::size_t a);

/// `count` concentric squares with sides grid * t / count, t = 1..count.
/// Offsets are floor((grid - side) / 2) when the margin is odd.
std::vector<PatchSpec> hierarchical_patches(std::size_t grid, std::size_t count);

/// Named sets P9, P12, P16, P20, P25, P30 at their default grids (48 or 45).
PatchSet build_patch_set(std::string_view name);

/// A named set's uniform layout (patches per side) and hierarchy depth placed
/// on a different grid; throws GeometryError when the grid does not divide.
PatchSet build_patch_set(std::string_view name, std::size_t grid);

/// uniform_per_side == 0 gives no uniform patches.
PatchSet custom_patch_set(std::size_t grid, std::size_t uniform_per_side, std::size_t hierarchical);

/// Text table of a set: one line per rectangle.
std::string describe_patch_set(const PatchSet& set);

/// f [b x h x w x c] -> [b x grid x grid x c], bilinear, half-pixel centres.
template <typename T>
Tensor<T> upsample_feature_map(const Tensor<T>& f, std::size_t grid);

/// Crops `p` from up [b x G x G x c] and bilinearly resizes it to out_h x out_w.
template <typename T>
Tensor<T> pool_patch(const Tensor<T>& up, const PatchSpec& p, std::size_t out_h, std::size_t out_w);

/// f [b x h x w x c] -> [b x n x h x w x c]: every patch pooled back to h x w.
template <typename T>
Tensor<T> extract_patch_features(const Tensor<T>& f, const PatchSet& set);

}  // namespace syd

#endif  // SYDNET_PATCHES_HPP_
