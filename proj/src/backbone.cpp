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
#include "sydnet/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "sydnet/error.hpp"

namespace syd {

template <typename T>
std::vector<std::size_t> ReferenceCnn<T>::block_widths(std::size_t channels) {
  return {std::max<std::size_t>(channels / 8, 1), std::max<std::size_t>(channels / 4, 1),
          std::max<std::size_t>(channels / 2, 1), channels, channels};
}

template <typename T>
std::size_t ReferenceCnn<T>::parameter_count(std::size_t channels) {
  std::size_t total = 0, cin = 3;
  for (auto cout : block_widths(channels)) {
    total += 9 * cin * cout + 2 * cout;
    cin = cout;
  }
  return total;
}

template <typename T>
ReferenceCnn<T>::ReferenceCnn(std::size_t channels, Rng& rng, double bn_momentum, double bn_eps)
    : channels_(channels) {
  if (channels == 0) throw ParameterError("reference CNN needs a positive channel count");
  std::size_t cin = 3;
  for (auto cout : block_widths(channels)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(9 * cin + 9 * cout));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<T> w(9 * cin * cout);
    for (auto& v : w) v = static_cast<T>(dist(rng));
    kernels_.emplace_back(Shape{3, 3, cin, cout}, std::move(w), true);
    norms_.emplace_back(cout, bn_momentum, bn_eps);
    cin = cout;
  }
}

template <typename T>
FeatureMap<T> ReferenceCnn<T>::forward(const Tensor<T>& images, bool training) {
  if (images.rank() != 4 || images.dim(3) != 3 || images.dim(1) != images.dim(2)) {
    throw DimensionError("reference CNN expects square RGB images [b x s x s x 3], got " + shape_str(images.shape()));
  }
  if (images.dim(1) % kReduction != 0) {
    throw DimensionError("reference CNN input size " + std::to_string(images.dim(1)) + " is not divisible by 32");
  }
  Tensor<T> x = images;
  for (std::size_t i = 0; i < kBlocks; ++i) x = relu(batch_norm(conv2d(x, kernels_[i], 2, 1), norms_[i], training));
  return {x, FeatureSource::kReferenceCnn};
}

template <typename T>
NamedTensors<T> ReferenceCnn<T>::parameters() const {
  NamedTensors<T> out;
  for (std::size_t i = 0; i < kBlocks; ++i) {
    const std::string prefix = "backbone.block" + std::to_string(i);
    out.push_back({prefix + ".conv.weight", kernels_[i]});
    out.push_back({prefix + ".bn.gamma", norms_[i].gamma});
    out.push_back({prefix + ".bn.beta", norms_[i].beta});
  }
  return out;
}

template <typename T>
NamedTensors<T> ReferenceCnn<T>::buffers() const {
  NamedTensors<T> out;
  for (std::size_t i = 0; i < kBlocks; ++i) {
    const std::string prefix = "backbone.block" + std::to_string(i);
    out.push_back({prefix + ".bn.running_mean", norms_[i].running_mean});
    out.push_back({prefix + ".bn.running_var", norms_[i].running_var});
  }
  return out;
}

template class ReferenceCnn<float>;
template class ReferenceCnn<double>;

// ---------------------------------------------------------------------------

void write_features(const std::filesystem::path& path, const FeatureGeometry& geometry,
                    std::span<const FeatureRecord> records) {
  if (geometry.values() == 0) throw FormatError("feature geometry must be positive", 0);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IngestionError("cannot open '" + path.string() + "' for writing");
  detail::write_bytes(os, "SYDF", 4);
  detail::write_le<std::uint32_t>(os, kFeatureFormatVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  detail::write_le<std::uint32_t>(os, geometry.h);
  detail::write_le<std::uint32_t>(os, geometry.w);
  detail::write_le<std::uint32_t>(os, geometry.c);
  for (const auto& r : records) {
    if (r.values.size() != geometry.values()) {
      throw DimensionError("feature record holds " + std::to_string(r.values.size()) + " values, geometry needs " +
                           std::to_string(geometry.values()));
    }
    detail::write_le<std::uint32_t>(os, r.label);
    detail::write_bytes(os, r.values.data(), r.values.size() * sizeof(float));
  }
  if (!os) throw IngestionError("write failed for '" + path.string() + "'");
}

struct FeatureReader::Impl {
  std::ifstream file;
  detail::BinaryReader reader;
  explicit Impl(const std::filesystem::path& path) : file(path, std::ios::binary), reader(file, path.string()) {}
};

FeatureReader::FeatureReader(const std::filesystem::path& path) : impl_(std::make_unique<Impl>(path)) {
  if (!impl_->file) throw IngestionError("cannot open feature file '" + path.string() + "'");
  auto& r = impl_->reader;
  char magic[4];
  r.read_bytes(magic, 4, "magic");
  if (std::memcmp(magic, "SYDF", 4) != 0) throw FormatError(path.string() + ": bad magic, expected SYDF", 0);
  const auto version = r.read<std::uint32_t>("version");
  if (version != kFeatureFormatVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version), 4);
  }
  count_ = r.read<std::uint32_t>("record count");
  geometry_.h = r.read<std::uint32_t>("h");
  geometry_.w = r.read<std::uint32_t>("w");
  geometry_.c = r.read<std::uint32_t>("c");
  if (geometry_.values() == 0) throw FormatError(path.string() + ": zero feature dimension", 12);
}

FeatureReader::~FeatureReader() = default;

std::optional<FeatureRecord> FeatureReader::next() {
  auto& r = impl_->reader;
  if (read_ == count_) {
    if (!r.at_end()) {
      throw FormatError("feature file has data beyond the " + std::to_string(count_) + " records in its header",
                        r.offset());
    }
    return std::nullopt;
  }
  FeatureRecord rec;
  rec.label = r.read<std::uint32_t>("record label");
  rec.values.resize(geometry_.values());
  r.read_bytes(rec.values.data(), rec.values.size() * sizeof(float), "record values");
  ++read_;
  return rec;
}

FeatureFile load_features(const std::filesystem::path& path) {
  FeatureReader reader(path);
  FeatureFile file;
  file.geometry = reader.geometry();
  file.records.reserve(reader.record_count());
  while (auto rec = reader.next()) file.records.push_back(std::move(*rec));
  return file;
}

template <typename T>
FeatureMap<T> stack_features(const FeatureFile& file, std::span<const std::size_t> indices) {
  const std::size_t per = file.geometry.values();
  std::vector<T> data;
  data.reserve(indices.size() * per);
  for (auto i : indices) {
    const auto& v = file.records.at(i).values;
    data.insert(data.end(), v.begin(), v.end());
  }
  Tensor<T> t({indices.size(), file.geometry.h, file.geometry.w, file.geometry.c}, std::move(data), false);
  return {t, FeatureSource::kImported};
}

template FeatureMap<float> stack_features(const FeatureFile&, std::span<const std::size_t>);
template FeatureMap<double> stack_features(const FeatureFile&, std::span<const std::size_t>);

}  // namespace syd
