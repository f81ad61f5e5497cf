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
#ifndef SYDNET_BACKBONE_HPP_
#define SYDNET_BACKBONE_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sydnet/ops.hpp"
#include "sydnet/optim.hpp"

namespace syd {

enum class FeatureSource { kReferenceCnn, kImported };

/// Backbone output [b x h x w x c].
template <typename T>
struct FeatureMap {
  Tensor<T> tensor;
  FeatureSource source = FeatureSource::kReferenceCnn;

  std::size_t h() const { return tensor.dim(1); }
  std::size_t w() const { return tensor.dim(2); }
  std::size_t c() const { return tensor.dim(3); }
};

struct BackboneSpec {
  FeatureSource kind = FeatureSource::kReferenceCnn;
  std::size_t input_size = 224;
  std::size_t channels = 128;
  bool trainable = true;  ///< always false for imported features
};

/**
 * Five stride-2 3x3 conv -> BN -> ReLU blocks, so an s x s image maps to an
 * (s/32) x (s/32) x channels feature map. Block widths are
 * c/8, c/4, c/2, c, c.
 */
template <typename T>
class ReferenceCnn {
 public:
  static constexpr std::size_t kBlocks = 5;
  static constexpr std::size_t kReduction = 32;

  ReferenceCnn(std::size_t channels, Rng& rng, double bn_momentum = 0.99, double bn_eps = 1e-5);

  /// images [b x s x s x 3] with s divisible by 32.
  FeatureMap<T> forward(const Tensor<T>& images, bool training);

  std::size_t channels() const { return channels_; }
  NamedTensors<T> parameters() const;
  NamedTensors<T> buffers() const;

  static std::vector<std::size_t> block_widths(std::size_t channels);
  static std::size_t parameter_count(std::size_t channels);

 private:
  std::size_t channels_;
  std::vector<Tensor<T>> kernels_;
  std::vector<BatchNorm<T>> norms_;
};

// ---------------------------------------------------------------------------
// SYDF feature files
//
//   "SYDF" | u32 version=1 | u32 record_count | u32 h | u32 w | u32 c
//   record_count x { u32 label | h*w*c x f32 }
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

struct FeatureGeometry {
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  std::uint32_t c = 0;
  std::size_t values() const { return static_cast<std::size_t>(h) * w * c; }
  bool operator==(const FeatureGeometry&) const = default;
};

struct FeatureRecord {
  std::uint32_t label = 0;
  std::vector<float> values;  // h*w*c, HWC order
};

void write_features(const std::filesystem::path& path, const FeatureGeometry& geometry,
                    std::span<const FeatureRecord> records);

/// Streaming reader; every malformed input raises FormatError with the offset.
class FeatureReader {
 public:
  explicit FeatureReader(const std::filesystem::path& path);
  ~FeatureReader();
  FeatureReader(const FeatureReader&) = delete;
  FeatureReader& operator=(const FeatureReader&) = delete;

  const FeatureGeometry& geometry() const { return geometry_; }
  std::uint32_t record_count() const { return count_; }
  /// Next record, or nullopt after the last one (checking nothing trails it).
  std::optional<FeatureRecord> next();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  FeatureGeometry geometry_;
  std::uint32_t count_ = 0;
  std::uint32_t read_ = 0;
};

struct FeatureFile {
  FeatureGeometry geometry;
  std::vector<FeatureRecord> records;
};

FeatureFile load_features(const std::filesystem::path& path);

/// Stacks records[indices] into an imported, gradient-free [b x h x w x c] map.
template <typename T>
FeatureMap<T> stack_features(const FeatureFile& file, std::span<const std::size_t> indices);

}  // namespace syd

#endif  // SYDNET_BACKBONE_HPP_
