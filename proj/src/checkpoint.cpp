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
#include "sydnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "sydnet/error.hpp"

namespace syd {

using detail::BinaryReader;
using detail::write_bytes;
using detail::write_le;

const StoredTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

template <typename T>
void append_tensors(Checkpoint& ckpt, const NamedTensors<T>& tensors) {
  for (const auto& [name, t] : tensors) {
    StoredTensor s;
    s.name = name;
    s.dtype = std::is_same_v<T, float> ? Dtype::kFloat32 : Dtype::kFloat64;
    s.shape = t.shape();
    s.values.assign(t.data().begin(), t.data().end());
    ckpt.tensors.push_back(std::move(s));
  }
}

template <typename T>
void restore_tensors(const Checkpoint& ckpt, const NamedTensors<T>& tensors) {
  for (const auto& [name, t] : tensors) {
    const auto* s = ckpt.find(name);
    if (!s) throw FormatError("checkpoint has no tensor '" + name + "'", 0);
    if (s->shape != t.shape()) {
      throw DimensionError("checkpoint tensor '" + name + "' has shape " + shape_str(s->shape) + ", model expects " +
                           shape_str(t.shape()));
    }
    auto handle = t;
    auto dst = handle.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(s->values[i]);
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IngestionError("cannot open '" + tmp.string() + "' for writing");
    write_bytes(os, "SYDW", 4);
    write_le<std::uint32_t>(os, kCheckpointVersion);
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
      if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("tensor name too long", 0);
      if (t.shape.size() > std::numeric_limits<std::uint8_t>::max()) throw FormatError("tensor rank too large", 0);
      write_le<std::uint16_t>(os, static_cast<std::uint16_t>(t.name.size()));
      write_bytes(os, t.name.data(), t.name.size());
      write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.dtype));
      write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.shape.size()));
      for (auto d : t.shape) write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
      for (double v : t.values) {
        if (t.dtype == Dtype::kFloat32) {
          write_le<float>(os, static_cast<float>(v));
        } else {
          write_le<double>(os, v);
        }
      }
    }
    write_le<std::uint64_t>(os, ckpt.config_hash);
    if (!os) throw IngestionError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestionError("cannot open checkpoint '" + path.string() + "'");
  const auto file_size = std::filesystem::file_size(path);
  BinaryReader in(is, path.string());
  char magic[4];
  in.read_bytes(magic, 4, "magic");
  if (std::memcmp(magic, "SYDW", 4) != 0) throw FormatError(path.string() + ": bad magic, expected SYDW", 0);
  const auto version = in.read<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version), 4);
  }
  Checkpoint ckpt;
  const auto count = in.read<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    const auto name_len = in.read<std::uint16_t>("name length");
    t.name.resize(name_len);
    in.read_bytes(t.name.data(), name_len, "tensor name");
    const auto dtype_offset = in.offset();
    const auto dtype = in.read<std::uint8_t>("dtype");
    if (dtype > 1) throw FormatError(path.string() + ": unknown dtype " + std::to_string(dtype), dtype_offset);
    t.dtype = static_cast<Dtype>(dtype);
    const auto rank = in.read<std::uint8_t>("rank");
    std::size_t numel = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      t.shape.push_back(in.read<std::uint32_t>("dimension"));
      numel *= t.shape.back();
    }
    const std::size_t width = t.dtype == Dtype::kFloat32 ? 4 : 8;
    if (numel > (file_size - in.offset()) / width) {
      throw FormatError(path.string() + ": tensor '" + t.name + "' is larger than the remaining file", in.offset());
    }
    t.values.resize(numel);
    for (auto& v : t.values) v = t.dtype == Dtype::kFloat32 ? in.read<float>("tensor data") : in.read<double>("tensor data");
    ckpt.tensors.push_back(std::move(t));
  }
  ckpt.config_hash = in.read<std::uint64_t>("config hash");
  if (!in.at_end()) throw FormatError(path.string() + ": trailing bytes after config hash", in.offset());
  return ckpt;
}

template void append_tensors<float>(Checkpoint&, const NamedTensors<float>&);
template void append_tensors<double>(Checkpoint&, const NamedTensors<double>&);
template void restore_tensors<float>(const Checkpoint&, const NamedTensors<float>&);
template void restore_tensors<double>(const Checkpoint&, const NamedTensors<double>&);

}  // namespace syd
