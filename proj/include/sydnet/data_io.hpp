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
#ifndef SYDNET_DATA_IO_HPP_
#define SYDNET_DATA_IO_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

namespace syd {

enum class Split { kTrain, kTest };

std::string to_string(Split split);
/// "train" or "test"; throws ConfigError otherwise.
Split parse_split(const std::string& text);

enum class SplitLayout {
  kSplitDirs,  ///< root/train/<class>/*, root/test/<class>/*
  kSplitFile,  ///< root/<class>/* plus a file of "<relative path> <train|test>" lines
};

struct ManifestEntry {
  std::string path;  ///< relative to the manifest root, '/' separated
  int label = 0;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<std::string> classes;  ///< sorted; index = label
  std::vector<ManifestEntry> entries;
  std::vector<std::string> warnings;  ///< skipped files, empty classes

  std::size_t num_classes() const { return classes.size(); }
  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const { return indices(split).size(); }
  std::filesystem::path full_path(const ManifestEntry& e) const { return root / e.path; }
};

/// Deterministic scan: classes and entries sorted, files without a known
/// image signature skipped with a warning. Throws IngestionError when no
/// class is found.
DatasetManifest scan_dataset(const std::filesystem::path& root, SplitLayout layout,
                             const std::filesystem::path& split_file = {});

/// One JSON object per line: {"path", "class", "split"}.
void write_manifest_jsonl(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Throws IngestionError when the class count differs.
void check_expected_classes(const DatasetManifest& manifest, std::size_t expected);

/// Decodes an image as 8-bit RGB resized to size x size. Throws IngestionError.
cv::Mat load_rgb(const std::filesystem::path& path, std::size_t size);

// ---------------------------------------------------------------------------
// Synthetic shapes
// ---------------------------------------------------------------------------

struct SynthSpec {
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 100;  ///< training images per class
  std::size_t image_size = 64;
  std::uint64_t seed = 7;

  /// Test images per class: a quarter of the training count (80/20 split).
  std::size_t test_per_class() const { return std::max<std::size_t>(1, samples_per_class / 4); }
};

/// Names of the drawable shape classes, in generation order.
const std::vector<std::string>& synthetic_class_names();

/// One shape on a noise background, 8-bit RGB.
cv::Mat render_synthetic(std::size_t class_index, std::size_t size, std::uint64_t seed);

/// Writes a split-dirs PNG tree under `out`. Identical seeds give identical bytes.
void generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out);

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

struct Batch {
  std::vector<std::size_t> entries;  ///< manifest indices actually decoded
  std::vector<cv::Mat> images;       ///< RGB at source size
  std::vector<int> labels;
};

class BatchIterator {
 public:
  /// shuffle_seed empty keeps manifest order. `jobs` > 1 decodes in parallel;
  /// batches come out in the same order either way.
  BatchIterator(const DatasetManifest& manifest, Split split, std::size_t batch_size,
                std::optional<std::uint64_t> shuffle_seed, std::size_t source_size, std::size_t jobs = 1);

  /// False once the split is exhausted. Undecodable images are skipped and
  /// counted; a batch is never empty.
  bool next(Batch& batch);

  std::size_t batch_count() const;
  std::size_t skipped() const { return skipped_.size(); }
  const std::vector<std::string>& skipped_paths() const { return skipped_; }
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const DatasetManifest& manifest_;
  std::size_t batch_size_;
  std::size_t source_size_;
  std::size_t jobs_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::vector<std::string> skipped_;
};

}  // namespace syd

#endif  // SYDNET_DATA_IO_HPP_
