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
#ifndef SYDNET_TRAINER_HPP_
#define SYDNET_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sydnet/attention.hpp"
#include "sydnet/augment.hpp"
#include "sydnet/backbone.hpp"
#include "sydnet/checkpoint.hpp"
#include "sydnet/data_io.hpp"
#include "sydnet/patches.hpp"

namespace syd {

enum class TrainMode { kScratch, kFrozenFeatures };
enum class Baseline { kNone, kGap, kEraseGap, kAttention };
enum class Precision { kFloat32, kFloat64 };

std::string to_string(TrainMode mode);
std::string to_string(Baseline baseline);
std::string to_string(Precision precision);

struct TrainConfig {
  std::string patch_set = "P20";
  std::size_t patch_grid = 0;  ///< 0 keeps the named set's grid
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  double lr = 0.007;
  std::size_t lr_step = 50;
  double lr_decay = 0.1;
  TrainMode mode = TrainMode::kScratch;
  Baseline baseline = Baseline::kNone;
  std::uint64_t seed = 0;
  Precision precision = Precision::kFloat32;
  std::size_t checkpoint_every = 10;
  std::size_t jobs = 1;

  std::size_t backbone_channels = 128;
  /// Head switches; n, h, w, c, num_classes and kind are filled in per model.
  HeadConfig head;
  AugmentConfig aug;

  TrainConfig();
  /// Throws ConfigError (GeometryError for patch layouts) on invalid values.
  void validate() const;
  /// The augmentation actually applied: plain GAP trains without erasing.
  AugmentConfig effective_aug() const;
};

/// Backbone output geometry and class count a model is built for.
struct ModelShape {
  std::size_t h = 0, w = 0, c = 0;
  std::size_t num_classes = 0;
};

struct ParameterCount {
  std::size_t backbone = 0;
  std::size_t channel_attention = 0;
  std::size_t spatial_attention = 0;
  std::size_t classifier = 0;
  std::size_t buffers = 0;  ///< BN running moments, not trained

  std::size_t head() const { return channel_attention + spatial_attention + classifier; }
  std::size_t attention() const { return channel_attention + spatial_attention; }
  std::size_t total() const { return backbone + head(); }
};

template <typename T>
class Model {
 public:
  Model(const TrainConfig& config, const ModelShape& shape, Rng& rng);

  /// Scratch mode: images [b x s x s x 3]. Frozen mode: features [b x h x w x c].
  HeadOutput<T> forward(const Tensor<T>& input, bool training, Rng& rng);
  /// Reference CNN output alone; scratch mode only.
  FeatureMap<T> backbone_forward(const Tensor<T>& images, bool training);

  NamedTensors<T> parameters() const;
  NamedTensors<T> buffers() const;
  ParameterCount count() const;

  const HeadConfig& head_config() const { return head_.config; }
  const ModelShape& shape() const { return shape_; }
  const std::optional<PatchSet>& patches() const { return patches_; }
  bool has_backbone() const { return backbone_.has_value(); }

 private:
  ModelShape shape_;
  std::optional<ReferenceCnn<T>> backbone_;
  std::optional<PatchSet> patches_;
  PbAParams<T> head_;
};

/// Head configuration a TrainConfig resolves to for a given geometry.
HeadConfig resolve_head(const TrainConfig& config, const ModelShape& shape);

/// Geometry the reference CNN produces for the configured crop size.
ModelShape scratch_shape(const TrainConfig& config, std::size_t num_classes);

struct MetricsRow {
  std::size_t epoch = 0;
  Split split = Split::kTrain;
  double loss = 0.0;
  double top1 = 0.0;  ///< percent
  double top5 = 0.0;  ///< percent
  double lr = 0.0;
};

inline constexpr const char* kMetricsHeader = "epoch,split,loss,top1,top5,lr";
std::string format_metrics_row(const MetricsRow& row);

/// True when `label` is among the k largest entries of `probs`; ties go to
/// the lower class index.
template <typename T>
bool topk_hit(std::span<const T> probs, std::size_t label, std::size_t k);

/// Samples come either from an image manifest (scratch) or from SYDF files.
struct TrainData {
  const DatasetManifest* manifest = nullptr;
  const FeatureFile* train_features = nullptr;
  const FeatureFile* test_features = nullptr;

  std::size_t num_classes() const;
  std::size_t count(Split split) const;
};

struct EvalResult {
  MetricsRow row;
  std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted]
  std::vector<std::vector<double>> probabilities;   ///< per sample, manifest order
  std::vector<int> labels;
};

template <typename T>
EvalResult evaluate(Model<T>& model, const TrainConfig& config, const TrainData& data, Split split);

void write_confusion_csv(const std::filesystem::path& path, const std::vector<std::vector<std::size_t>>& confusion);

struct TrainResult {
  std::vector<MetricsRow> history;
  MetricsRow final_test;
  MetricsRow best_test;
  ParameterCount parameters;
};

/// Progress callback invoked after every epoch with the train and test rows.
using EpochCallback = std::function<void(const MetricsRow& train, const MetricsRow& test)>;

/// Runs the full schedule and writes metrics.csv, log.txt and checkpoints/
/// under run_dir. Throws NumericError when the loss turns non-finite.
TrainResult train(const TrainConfig& config, const TrainData& data, const std::filesystem::path& run_dir,
                  std::uint64_t config_hash, const EpochCallback& on_epoch = {});

/// Checkpoint of a model's parameters, buffers and the epoch.
template <typename T>
Checkpoint make_checkpoint(const Model<T>& model, std::size_t epoch, std::uint64_t config_hash);

/// Rebuilds a model from a checkpoint (hash already verified by the caller).
template <typename T>
Model<T> load_model(const TrainConfig& config, const ModelShape& shape, const Checkpoint& ckpt);

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

struct AblationVariant {
  std::string id;     ///< e.g. "ca_only"
  std::string label;  ///< table label, e.g. "Channel attention only: CA_{30}"
  TrainConfig config;
};

/// Known component ids: full, patches_only, ca_only, sa_only, sigmoid_sa,
/// general_dropout, no_gaussian_dropout, erase1_rand, erase1_fixed,
/// erase2_fixed, gap, erase_gap, attention.
const std::vector<std::string>& ablation_components();

/// Cartesian product of patch sets and component ids applied to `base`.
std::vector<AblationVariant> ablation_grid(const TrainConfig& base, const std::vector<std::string>& patch_sets,
                                           const std::vector<std::string>& components);

struct AblationRow {
  AblationVariant variant;
  bool ok = false;
  std::string error;
  MetricsRow final_test;
  MetricsRow best_test;
  ParameterCount parameters;
};

inline constexpr const char* kAblationHeader =
    "variant,label,patch_set,status,epoch,split,loss,top1,top5,lr,best_top1,parameters";

/// Trains every variant into out_dir/<patch_set>_<id>/ and writes
/// out_dir/ablation.csv. Failed variants become status=failed rows.
std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& variants, const TrainData& data,
                                      const std::filesystem::path& out_dir, std::size_t jobs,
                                      const std::function<std::uint64_t(const TrainConfig&)>& hash);

}  // namespace syd

#endif  // SYDNET_TRAINER_HPP_
