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
#include "sydnet/patches.hpp"

#include <array>
#include <cstdio>
#include <sstream>

#include "sydnet/error.hpp"
#include "sydnet/ops.hpp"

namespace syd {

namespace {

struct NamedLayout {
  std::string_view name;
  std::size_t grid;
  std::size_t per_side;
  std::size_t hierarchical;
};

// Uniform patches per side and hierarchy depth of the named sets.
constexpr std::array<NamedLayout, 6> kNamedSets{{
    {"P9", 48, 3, 0},
    {"P12", 48, 3, 3},
    {"P16", 48, 4, 0},
    {"P20", 48, 4, 4},
    {"P25", 45, 5, 0},
    {"P30", 45, 5, 5},
}};

const NamedLayout& lookup(std::string_view name) {
  for (const auto& l : kNamedSets) {
    if (l.name == name) return l;
  }
  throw GeometryError("unknown patch set '" + std::string(name) + "' (expected P9, P12, P16, P20, P25 or P30)");
}

}  // namespace

std::vector<PatchSpec> PatchSet::all() const {
  std::vector<PatchSpec> out = uniform;
  out.insert(out.end(), hierarchical.begin(), hierarchical.end());
  return out;
}

std::vector<PatchSpec> uniform_grid(std::size_t grid, std::size_t a) {
  if (a == 0 || grid == 0 || grid % a != 0) {
    throw GeometryError("uniform patch side " + std::to_string(a) + " does not divide grid side " +
                        std::to_string(grid));
  }
  std::vector<PatchSpec> out;
  for (std::size_t y = 0; y < grid; y += a)
    for (std::size_t x = 0; x < grid; x += a) out.push_back({x, y, a, a});
  return out;
}

std::vector<PatchSpec> hierarchical_patches(std::size_t grid, std::size_t count) {
  if (count == 0 || grid == 0 || grid % count != 0) {
    throw GeometryError(std::to_string(count) + " hierarchical levels do not divide grid side " +
                        std::to_string(grid));
  }
  const std::size_t step = grid / count;
  std::vector<PatchSpec> out;
  for (std::size_t t = 1; t <= count; ++t) {
    const std::size_t side = step * t;
    const std::size_t offset = (grid - side) / 2;
    out.push_back({offset, offset, side, side});
  }
  return out;
}

PatchSet custom_patch_set(std::size_t grid, std::size_t uniform_per_side, std::size_t hierarchical) {
  PatchSet set;
  set.name = "custom";
  set.grid = grid;
  if (uniform_per_side > 0) {
    if (grid % uniform_per_side != 0) {
      throw GeometryError(std::to_string(uniform_per_side) + "x" + std::to_string(uniform_per_side) +
                          " uniform patches do not divide grid side " + std::to_string(grid));
    }
    set.uniform = uniform_grid(grid, grid / uniform_per_side);
  }
  if (hierarchical > 0) set.hierarchical = hierarchical_patches(grid, hierarchical);
  if (set.n() == 0) throw GeometryError("patch set must contain at least one patch");
  return set;
}

PatchSet build_patch_set(std::string_view name, std::size_t grid) {
  const NamedLayout& layout = lookup(name);
  PatchSet set = custom_patch_set(grid, layout.per_side, layout.hierarchical);
  set.name = std::string(layout.name);
  return set;
}

PatchSet build_patch_set(std::string_view name) { return build_patch_set(name, lookup(name).grid); }

std::string describe_patch_set(const PatchSet& set) {
  std::ostringstream os;
  os << "patch set " << set.name << ": n=" << set.n() << " grid=" << set.grid << "x" << set.grid << " ("
     << set.uniform.size() << " uniform + " << set.hierarchical.size() << " hierarchical)\n";
  os << "idx  kind            x    y   dw   dh\n";
  std::size_t i = 0;
  auto row = [&](const PatchSpec& p, const char* kind) {
    char line[96];
    std::snprintf(line, sizeof line, "%3zu  %-12s  %3zu  %3zu  %3zu  %3zu\n", i++, kind, p.x, p.y, p.dw, p.dh);
    os << line;
  };
  for (const auto& p : set.uniform) row(p, "uniform");
  for (const auto& p : set.hierarchical) row(p, "hierarchical");
  return os.str();
}

template <typename T>
Tensor<T> upsample_feature_map(const Tensor<T>& f, std::size_t grid) {
  if (f.rank() != 4) throw DimensionError("upsample_feature_map: expected [b x h x w x c], got " + shape_str(f.shape()));
  if (grid < f.dim(1) || grid < f.dim(2)) {
    throw GeometryError("upsampled grid " + std::to_string(grid) + " is smaller than feature map " +
                        shape_str(f.shape()));
  }
  return bilinear_crop_resize(f, Region{0, 0, f.dim(1), f.dim(2)}, grid, grid);
}

template <typename T>
Tensor<T> pool_patch(const Tensor<T>& up, const PatchSpec& p, std::size_t out_h, std::size_t out_w) {
  if (up.rank() != 4) throw DimensionError("pool_patch: expected [b x G x G x c], got " + shape_str(up.shape()));
  if (p.dw == 0 || p.dh == 0 || p.x + p.dw > up.dim(2) || p.y + p.dh > up.dim(1)) {
    throw GeometryError("patch [x=" + std::to_string(p.x) + ", y=" + std::to_string(p.y) + ", dw=" +
                        std::to_string(p.dw) + ", dh=" + std::to_string(p.dh) + "] lies outside grid " +
                        std::to_string(up.dim(1)) + "x" + std::to_string(up.dim(2)));
  }
  return bilinear_crop_resize(up, Region{p.y, p.x, p.dh, p.dw}, out_h, out_w);
}

template <typename T>
Tensor<T> extract_patch_features(const Tensor<T>& f, const PatchSet& set) {
  if (f.rank() != 4) throw DimensionError("extract_patch_features: expected [b x h x w x c], got " + shape_str(f.shape()));
  const std::size_t b = f.dim(0), h = f.dim(1), w = f.dim(2), c = f.dim(3);
  const Tensor<T> up = upsample_feature_map(f, set.grid);
  std::vector<Tensor<T>> pooled;
  pooled.reserve(set.n());
  for (const auto& p : set.all()) pooled.push_back(reshape(pool_patch(up, p, h, w), Shape{b, 1, h, w, c}));
  return concat<T>(pooled, 1);
}

template Tensor<float> upsample_feature_map(const Tensor<float>&, std::size_t);
template Tensor<double> upsample_feature_map(const Tensor<double>&, std::size_t);
template Tensor<float> pool_patch(const Tensor<float>&, const PatchSpec&, std::size_t, std::size_t);
template Tensor<double> pool_patch(const Tensor<double>&, const PatchSpec&, std::size_t, std::size_t);
template Tensor<float> extract_patch_features(const Tensor<float>&, const PatchSet&);
template Tensor<double> extract_patch_features(const Tensor<double>&, const PatchSet&);

}  // namespace syd
