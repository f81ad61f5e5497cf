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
#ifndef SYDNET_CHECKPOINT_HPP_
#define SYDNET_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sydnet/optim.hpp"

namespace syd {

// ---------------------------------------------------------------------------
// SYDW checkpoints
//
//   "SYDW" | u32 version=1 | u32 tensor_count
//   tensor_count x { u16 name_len | name | u8 dtype (0=f32, 1=f64) | u8 rank |
//                    rank x u32 dims | raw data }
//   u64 config hash
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class Dtype : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

struct StoredTensor {
  std::string name;
  Dtype dtype = Dtype::kFloat32;
  Shape shape;
  std::vector<double> values;  ///< f32 payloads round-trip exactly through double
};

struct Checkpoint {
  std::vector<StoredTensor> tensors;
  std::uint64_t config_hash = 0;

  const StoredTensor* find(const std::string& name) const;
};

template <typename T>
void append_tensors(Checkpoint& ckpt, const NamedTensors<T>& tensors);

/// Copies stored values into `tensors` by name. Throws FormatError for a
/// missing name and DimensionError for a shape mismatch.
template <typename T>
void restore_tensors(const Checkpoint& ckpt, const NamedTensors<T>& tensors);

/// Written to a temporary sibling and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace syd

#endif  // SYDNET_CHECKPOINT_HPP_
