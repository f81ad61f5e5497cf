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
#include "sydnet/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

#include "sydnet/error.hpp"

namespace syd {

namespace fs = std::filesystem;

std::string to_string(TrainMode mode) { return mode == TrainMode::kScratch ? "scratch" : "frozen_features"; }

std::string to_string(Baseline baseline) {
  switch (baseline) {
    case Baseline::kNone: return "none";
    case Baseline::kGap: return "gap";
    case Baseline::kEraseGap: return "erase_gap";
    case Baseline::kAttention: return "attention";
  }
  return "none";
}

std::string to_string(Precision precision) { return precision == Precision::kFloat32 ? "f32" : "f64"; }

TrainConfig::TrainConfig() {
  aug.erase_regions = 2;
  aug.erase_fill = EraseFill::kRandomRgb;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(epochs > 0, "train.epochs must be positive");
  require(batch_size > 0, "train.batch_size must be positive");
  require(lr > 0 && std::isfinite(lr), "train.lr must be positive");
  require(lr_step > 0, "train.lr_step must be positive");
  require(lr_decay > 0 && lr_decay <= 1, "train.lr_decay must lie in (0, 1]");
  require(checkpoint_every > 0, "train.checkpoint_every must be positive");
  require(jobs > 0, "jobs must be positive");
  require(head.rho >= 0 && head.rho < 1, "attention.rho must lie in [0, 1)");
  require(head.bn_eps > 0, "train.bn_eps must be positive");
  require(head.bn_momentum >= 0 && head.bn_momentum < 1, "train.bn_momentum must lie in [0, 1)");
  if (mode == TrainMode::kScratch) {
    require(backbone_channels >= 8, "backbone.channels must be at least 8");
    require(aug.crop_size >= ReferenceCnn<float>::kReduction && aug.crop_size % ReferenceCnn<float>::kReduction == 0,
            "aug.crop_size must be a positive multiple of 32");
    require(aug.crop_size <= aug.source_size, "aug.crop_size exceeds aug.source_size");
  }
  try {
    aug.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (baseline == Baseline::kNone) {
    // Throws GeometryError with the divisibility failure.
    if (patch_grid == 0) {
      build_patch_set(patch_set);
    } else {
      build_patch_set(patch_set, patch_grid);
    }
  }
}

AugmentConfig TrainConfig::effective_aug() const {
  AugmentConfig out = aug;
  if (baseline == Baseline::kGap) out.erase_regions = 0;
  return out;
}

namespace {

std::optional<PatchSet> patch_set_for(const TrainConfig& config) {
  if (config.baseline != Baseline::kNone) return std::nullopt;
  return config.patch_grid == 0 ? build_patch_set(config.patch_set)
                                : build_patch_set(config.patch_set, config.patch_grid);
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
  return std::string(buf, end);
}

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

HeadConfig resolve_head(const TrainConfig& config, const ModelShape& shape) {
  HeadConfig head = config.head;
  head.h = shape.h;
  head.w = shape.w;
  head.c = shape.c;
  head.num_classes = shape.num_classes;
  switch (config.baseline) {
    case Baseline::kNone:
      head.kind = HeadKind::kPbA;
      head.n = patch_set_for(config)->n();
      break;
    case Baseline::kGap:
    case Baseline::kEraseGap:
      head.kind = HeadKind::kGap;
      head.n = 1;
      break;
    case Baseline::kAttention:
      head.kind = HeadKind::kAttentionBaseline;
      head.n = shape.h * shape.w;
      break;
  }
  return head;
}

ModelShape scratch_shape(const TrainConfig& config, std::size_t num_classes) {
  const std::size_t side = config.aug.crop_size / ReferenceCnn<float>::kReduction;
  return {side, side, config.backbone_channels, num_classes};
}

template <typename T>
Model<T>::Model(const TrainConfig& config, const ModelShape& shape, Rng& rng) : shape_(shape) {
  if (shape.num_classes < 2) throw ConfigError("at least 2 classes are required");
  if (config.mode == TrainMode::kScratch) {
    backbone_.emplace(config.backbone_channels, rng, config.head.bn_momentum, config.head.bn_eps);
  }
  patches_ = patch_set_for(config);
  head_ = PbAParams<T>::init(resolve_head(config, shape), rng);
}

template <typename T>
HeadOutput<T> Model<T>::forward(const Tensor<T>& input, bool training, Rng& rng) {
  Tensor<T> f = backbone_ ? backbone_->forward(input, training).tensor : input;
  if (f.rank() != 4 || f.dim(1) != shape_.h || f.dim(2) != shape_.w || f.dim(3) != shape_.c) {
    throw DimensionError("feature map " + shape_str(f.shape()) + " does not match the model (h,w,c) = (" +
                         std::to_string(shape_.h) + "," + std::to_string(shape_.w) + "," +
                         std::to_string(shape_.c) + ")");
  }
  return head_forward(f, patches_ ? &*patches_ : nullptr, head_, training, rng);
}

template <typename T>
FeatureMap<T> Model<T>::backbone_forward(const Tensor<T>& images, bool training) {
  if (!backbone_) throw ConfigError("model has no backbone (train.mode=frozen_features)");
  return backbone_->forward(images, training);
}

template <typename T>
NamedTensors<T> Model<T>::parameters() const {
  NamedTensors<T> out = backbone_ ? backbone_->parameters() : NamedTensors<T>{};
  for (auto& p : head_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
NamedTensors<T> Model<T>::buffers() const {
  NamedTensors<T> out = backbone_ ? backbone_->buffers() : NamedTensors<T>{};
  for (auto& p : head_.buffers()) out.push_back(p);
  return out;
}

template <typename T>
ParameterCount Model<T>::count() const {
  ParameterCount c;
  for (const auto& p : parameters()) {
    const auto n = p.tensor.numel();
    if (starts_with(p.name, "head.ca.")) {
      c.channel_attention += n;
    } else if (starts_with(p.name, "head.sa.")) {
      c.spatial_attention += n;
    } else if (starts_with(p.name, "head.cls.")) {
      c.classifier += n;
    } else {
      c.backbone += n;
    }
  }
  for (const auto& b : buffers()) c.buffers += b.tensor.numel();
  return c;
}

std::string format_metrics_row(const MetricsRow& row) {
  return std::to_string(row.epoch) + "," + to_string(row.split) + "," + fmt(row.loss) + "," + fmt(row.top1) + "," +
         fmt(row.top5) + "," + fmt(row.lr);
}

template <typename T>
bool topk_hit(std::span<const T> probs, std::size_t label, std::size_t k) {
  if (label >= probs.size()) {
    throw LabelError("label " + std::to_string(label) + " out of range for " + std::to_string(probs.size()) +
                     " classes");
  }
  const T p = probs[label];
  std::size_t rank = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] > p || (probs[j] == p && j < label)) ++rank;
  }
  return rank < k;
}

std::size_t TrainData::num_classes() const {
  if (manifest) return manifest->num_classes();
  std::uint32_t top = 0;
  for (const FeatureFile* f : {train_features, test_features}) {
    if (!f) continue;
    for (const auto& r : f->records) top = std::max(top, r.label + 1);
  }
  return top;
}

std::size_t TrainData::count(Split split) const {
  if (manifest) return manifest->count(split);
  const FeatureFile* f = split == Split::kTrain ? train_features : test_features;
  return f ? f->records.size() : 0;
}

namespace {

// Stream tags for derive_seed.
enum : std::uint64_t { kInitStream = 1, kShuffleStream, kAugStream, kHeadStream };

template <typename T>
struct LoadedBatch {
  Tensor<T> input;
  std::vector<int> labels;
};

/// Walks a split once, handing each assembled batch to `fn`.
template <typename T, typename Fn>
void for_each_batch(const TrainConfig& config, const TrainData& data, Split split, bool training, std::size_t epoch,
                    Fn&& fn) {
  const auto shuffle_seed = derive_seed(config.seed, {kShuffleStream, epoch});
  if (data.manifest) {
    const AugmentConfig aug = config.effective_aug();
    const std::size_t s = aug.crop_size;
    BatchIterator it(*data.manifest, split, config.batch_size,
                     training ? std::optional<std::uint64_t>(shuffle_seed) : std::nullopt, aug.source_size,
                     config.jobs);
    Batch batch;
    while (it.next(batch)) {
      const std::size_t b = batch.images.size();
      std::vector<T> pixels;
      pixels.reserve(b * s * s * 3);
      for (std::size_t i = 0; i < b; ++i) {
        std::vector<float> px;
        if (training) {
          Rng rng(derive_seed(config.seed, {kAugStream, epoch, batch.entries[i]}));
          px = augment_train(batch.images[i], aug, rng).pixels;
        } else {
          px = augment_eval(batch.images[i], aug);
        }
        pixels.insert(pixels.end(), px.begin(), px.end());
      }
      fn(LoadedBatch<T>{Tensor<T>({b, s, s, 3}, std::move(pixels)), batch.labels});
    }
    return;
  }
  const FeatureFile* file = split == Split::kTrain ? data.train_features : data.test_features;
  if (!file) throw IngestionError("no " + to_string(split) + " feature file");
  std::vector<std::size_t> order(file->records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (training) {
    Rng rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    std::span<const std::size_t> idx(order.data() + start, end - start);
    LoadedBatch<T> lb;
    lb.input = stack_features<T>(*file, idx).tensor;
    for (auto i : idx) lb.labels.push_back(static_cast<int>(file->records[i].label));
    fn(std::move(lb));
  }
}

struct Tally {
  double loss_sum = 0.0;
  std::size_t samples = 0, top1 = 0, top5 = 0;

  template <typename T>
  void add(const Tensor<T>& probs, std::span<const int> labels, double batch_loss) {
    const std::size_t L = probs.dim(1);
    const auto data = probs.data();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      std::span<const T> row(data.data() + i * L, L);
      top1 += topk_hit(row, static_cast<std::size_t>(labels[i]), 1);
      top5 += topk_hit(row, static_cast<std::size_t>(labels[i]), 5);
    }
    loss_sum += batch_loss * static_cast<double>(labels.size());
    samples += labels.size();
  }

  MetricsRow row(std::size_t epoch, Split split, double lr) const {
    MetricsRow r;
    r.epoch = epoch;
    r.split = split;
    r.lr = lr;
    if (samples > 0) {
      r.loss = loss_sum / static_cast<double>(samples);
      r.top1 = 100.0 * static_cast<double>(top1) / static_cast<double>(samples);
      r.top5 = 100.0 * static_cast<double>(top5) / static_cast<double>(samples);
    }
    return r;
  }
};

void check_geometry(const ModelShape& shape, const TrainData& data) {
  auto mismatch = [&](const std::string& found) {
    throw DimensionError("data geometry (h,w,c,L) = " + found + " does not match the model's expected (" +
                         std::to_string(shape.h) + "," + std::to_string(shape.w) + "," + std::to_string(shape.c) +
                         "," + std::to_string(shape.num_classes) + ")");
  };
  if (data.num_classes() != shape.num_classes) {
    mismatch("(.,.,.," + std::to_string(data.num_classes()) + ")");
  }
  for (const FeatureFile* f : {data.train_features, data.test_features}) {
    if (!f || data.manifest) continue;
    const auto& g = f->geometry;
    if (g.h != shape.h || g.w != shape.w || g.c != shape.c) {
      mismatch("(" + std::to_string(g.h) + "," + std::to_string(g.w) + "," + std::to_string(g.c) + "," +
               std::to_string(data.num_classes()) + ")");
    }
  }
}

ModelShape shape_for(const TrainConfig& config, const TrainData& data) {
  if (config.mode == TrainMode::kScratch) {
    if (!data.manifest) throw ConfigError("train.mode=scratch needs an image dataset");
    return scratch_shape(config, data.num_classes());
  }
  if (!data.train_features || !data.test_features) {
    throw ConfigError("train.mode=frozen_features needs data.train_features and data.test_features");
  }
  const auto& g = data.train_features->geometry;
  return {g.h, g.w, g.c, data.num_classes()};
}

template <typename T>
std::string gradient_report(const NamedTensors<T>& params) {
  std::ostringstream out;
  for (const auto& p : params) {
    double sq = 0.0;
    bool finite = true;
    if (p.tensor.has_grad()) {
      for (T g : p.tensor.grad()) {
        if (!std::isfinite(static_cast<double>(g))) finite = false;
        sq += static_cast<double>(g) * static_cast<double>(g);
      }
    }
    out << "  " << p.name << " grad_norm=" << (finite ? fmt(std::sqrt(sq)) : std::string("non-finite")) << '\n';
  }
  return out.str();
}

template <typename T>
bool gradients_finite(const NamedTensors<T>& params) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad())
      if (!std::isfinite(static_cast<double>(g))) return false;
  }
  return true;
}

class RunLog {
 public:
  explicit RunLog(const fs::path& path) : out_(path, std::ios::app) {
    if (!out_) throw IngestionError("cannot write " + path.string());
  }
  void line(const std::string& text) {
    out_ << text << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

std::string describe_count(const ParameterCount& c) {
  return "parameters total=" + std::to_string(c.total()) + " backbone=" + std::to_string(c.backbone) +
         " channel_attention=" + std::to_string(c.channel_attention) +
         " spatial_attention=" + std::to_string(c.spatial_attention) + " classifier=" + std::to_string(c.classifier) +
         " buffers=" + std::to_string(c.buffers);
}

template <typename T>
TrainResult train_impl(const TrainConfig& config, const TrainData& data, const fs::path& run_dir,
                       std::uint64_t config_hash, const EpochCallback& on_epoch) {
  config.validate();
  const ModelShape shape = shape_for(config, data);
  check_geometry(shape, data);
  if (data.count(Split::kTrain) == 0) throw IngestionError("the training split is empty");

  fs::create_directories(run_dir / "checkpoints");
  RunLog log(run_dir / "log.txt");
  std::ofstream metrics(run_dir / "metrics.csv", std::ios::trunc);
  if (!metrics) throw IngestionError("cannot write " + (run_dir / "metrics.csv").string());
  metrics << kMetricsHeader << '\n';

  Rng init_rng(derive_seed(config.seed, {kInitStream}));
  Model<T> model(config, shape, init_rng);
  NamedTensors<T> params = model.parameters();
  SgdState sgd(config.lr, config.lr_step, config.lr_decay);

  TrainResult result;
  result.parameters = model.count();
  log.line("model " + to_string(model.head_config().kind) + " n=" + std::to_string(model.head_config().n) +
           " h=" + std::to_string(shape.h) + " w=" + std::to_string(shape.w) + " c=" + std::to_string(shape.c) +
           " L=" + std::to_string(shape.num_classes));
  log.line(describe_count(result.parameters));
  log.line("train samples=" + std::to_string(data.count(Split::kTrain)) +
           " test samples=" + std::to_string(data.count(Split::kTest)));

  bool have_best = false;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    sgd.epoch = epoch;
    const double lr = sgd.effective_lr();
    Tally tally;
    std::size_t batch_index = 0;
    for_each_batch<T>(config, data, Split::kTrain, true, epoch, [&](LoadedBatch<T> lb) {
      Rng head_rng(derive_seed(config.seed, {kHeadStream, epoch, batch_index++}));
      zero_grad(params);
      auto out = model.forward(lb.input, true, head_rng);
      auto loss = cross_entropy(out.y_pred, std::span<const int>(lb.labels));
      loss.backward();
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value) || !gradients_finite(params)) {
        const std::string report = "non-finite " + std::string(std::isfinite(value) ? "gradient" : "loss") +
                                   " at epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(batch_index - 1) + " (loss=" + fmt(value) + ")\n" +
                                   gradient_report(params);
        log.line(report);
        throw NumericError(report);
      }
      sgd_step(params, sgd);
      tally.add(out.y_pred, lb.labels, value);
    });
    const MetricsRow train_row = tally.row(epoch, Split::kTrain, lr);
    EvalResult test = evaluate(model, config, data, Split::kTest);
    test.row.epoch = epoch;
    test.row.lr = lr;

    metrics << format_metrics_row(train_row) << '\n' << format_metrics_row(test.row) << '\n';
    metrics.flush();
    result.history.push_back(train_row);
    result.history.push_back(test.row);
    log.line("epoch " + std::to_string(epoch) + " lr=" + fmt(lr) + " train_loss=" + fmt(train_row.loss) +
             " train_top1=" + fmt(train_row.top1) + " test_loss=" + fmt(test.row.loss) +
             " test_top1=" + fmt(test.row.top1) + " test_top5=" + fmt(test.row.top5));

    if (!have_best || test.row.top1 > result.best_test.top1) {
      have_best = true;
      result.best_test = test.row;
      save_checkpoint(run_dir / "checkpoints" / "best.sydw", make_checkpoint(model, epoch, config_hash));
      write_confusion_csv(run_dir / "confusion_best.csv", test.confusion);
    }
    if ((epoch + 1) % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04zu.sydw", epoch);
      save_checkpoint(run_dir / "checkpoints" / name, make_checkpoint(model, epoch, config_hash));
    }
    if (epoch + 1 == config.epochs) {
      result.final_test = test.row;
      save_checkpoint(run_dir / "checkpoints" / "final.sydw", make_checkpoint(model, epoch, config_hash));
      write_confusion_csv(run_dir / "confusion_final.csv", test.confusion);
    }
    if (on_epoch) on_epoch(train_row, test.row);
  }
  log.line("final test top1=" + fmt(result.final_test.top1) + " top5=" + fmt(result.final_test.top5) +
           "; best test top1=" + fmt(result.best_test.top1) + " at epoch " + std::to_string(result.best_test.epoch));
  return result;
}

}  // namespace

template <typename T>
EvalResult evaluate(Model<T>& model, const TrainConfig& config, const TrainData& data, Split split) {
  check_geometry(model.shape(), data);
  const std::size_t L = model.shape().num_classes;
  EvalResult result;
  result.confusion.assign(L, std::vector<std::size_t>(L, 0));
  Tally tally;
  Rng unused(0);
  for_each_batch<T>(config, data, split, false, 0, [&](LoadedBatch<T> lb) {
    auto out = model.forward(lb.input, false, unused);
    auto loss = cross_entropy(out.y_pred, std::span<const int>(lb.labels));
    tally.add(out.y_pred, lb.labels, static_cast<double>(loss.item()));
    const auto probs = out.y_pred.data();
    for (std::size_t i = 0; i < lb.labels.size(); ++i) {
      std::vector<double> row(probs.begin() + static_cast<std::ptrdiff_t>(i * L),
                              probs.begin() + static_cast<std::ptrdiff_t>((i + 1) * L));
      std::size_t pred = 0;
      for (std::size_t j = 1; j < L; ++j)
        if (row[j] > row[pred]) pred = j;
      ++result.confusion[static_cast<std::size_t>(lb.labels[i])][pred];
      result.probabilities.push_back(std::move(row));
      result.labels.push_back(lb.labels[i]);
    }
  });
  result.row = tally.row(0, split, 0.0);
  return result;
}

void write_confusion_csv(const fs::path& path, const std::vector<std::vector<std::size_t>>& confusion) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path.string());
  for (const auto& row : confusion) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
}

TrainResult train(const TrainConfig& config, const TrainData& data, const fs::path& run_dir,
                  std::uint64_t config_hash, const EpochCallback& on_epoch) {
  if (config.precision == Precision::kFloat64) return train_impl<double>(config, data, run_dir, config_hash, on_epoch);
  return train_impl<float>(config, data, run_dir, config_hash, on_epoch);
}

template <typename T>
Checkpoint make_checkpoint(const Model<T>& model, std::size_t epoch, std::uint64_t config_hash) {
  Checkpoint ckpt;
  ckpt.config_hash = config_hash;
  append_tensors(ckpt, model.parameters());
  append_tensors(ckpt, model.buffers());
  ckpt.tensors.push_back({"meta.epoch", Dtype::kFloat64, {1}, {static_cast<double>(epoch)}});
  return ckpt;
}

template <typename T>
Model<T> load_model(const TrainConfig& config, const ModelShape& shape, const Checkpoint& ckpt) {
  Rng rng(0);
  Model<T> model(config, shape, rng);
  restore_tensors(ckpt, model.parameters());
  restore_tensors(ckpt, model.buffers());
  return model;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

const std::vector<std::string>& ablation_components() {
  static const std::vector<std::string> ids = {
      "full",        "patches_only", "ca_only",      "sa_only", "sigmoid_sa", "general_dropout", "no_gaussian_dropout",
      "erase1_rand", "erase1_fixed", "erase2_fixed", "gap",     "erase_gap",  "attention"};
  return ids;
}

namespace {

AblationVariant make_variant(const TrainConfig& base, const std::string& set, const std::string& id) {
  const std::string n = set.size() > 1 && (set[0] == 'P' || set[0] == 'p') ? set.substr(1) : set;
  const std::string p = "P" + n;
  AblationVariant v{id, "", base};
  TrainConfig& c = v.config;
  c.patch_set = set;
  c.baseline = Baseline::kNone;
  c.head.channel_attention = true;
  c.head.spatial_attention = true;
  c.head.sa_activation = SpatialActivation::kSoftmax;
  c.head.dropout = DropoutKind::kGaussian;
  c.aug.erase_regions = 2;
  c.aug.erase_fill = EraseFill::kRandomRgb;
  if (id == "full") {
    v.label = p + ", 2 erased regions, rand RGB";
  } else if (id == "patches_only") {
    c.head.channel_attention = false;
    c.head.spatial_attention = false;
    v.label = "Using " + p + " only, no attention";
  } else if (id == "ca_only") {
    c.head.spatial_attention = false;
    v.label = "Channel attention only: CA_{" + n + "}";
  } else if (id == "sa_only") {
    c.head.channel_attention = false;
    v.label = "Spatial attention only: SA_{" + n + "}";
  } else if (id == "sigmoid_sa") {
    c.head.sa_activation = SpatialActivation::kSigmoid;
    v.label = "sigmoid spatial attention: SA_{" + n + "}";
  } else if (id == "general_dropout") {
    c.head.dropout = DropoutKind::kStandard;
    v.label = p + " with general dropout";
  } else if (id == "no_gaussian_dropout") {
    c.head.dropout = DropoutKind::kNone;
    v.label = p + " without Gaussian dropout";
  } else if (id == "erase1_rand") {
    c.aug.erase_regions = 1;
    v.label = p + " with 1 erased region, rand RGB";
  } else if (id == "erase1_fixed") {
    c.aug.erase_regions = 1;
    c.aug.erase_fill = EraseFill::kFixed127;
    v.label = p + " with 1 erased region, fixed RGB=127";
  } else if (id == "erase2_fixed") {
    c.aug.erase_fill = EraseFill::kFixed127;
    v.label = p + " with 2 erased regions, fixed RGB=127";
  } else if (id == "gap") {
    c.baseline = Baseline::kGap;
    v.label = "Baseline (a): GAP, conventional augmentation";
  } else if (id == "erase_gap") {
    c.baseline = Baseline::kEraseGap;
    v.label = "Baseline (b): GAP with random erasing";
  } else if (id == "attention") {
    c.baseline = Baseline::kAttention;
    v.label = "Baseline (c): attentional weights, no patches";
  } else {
    throw ConfigError("unknown ablation component '" + id + "'");
  }
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

void write_ablation_csv(const fs::path& path, const std::vector<std::optional<AblationRow>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << kAblationHeader << '\n';
  for (const auto& r : rows) {
    if (!r) continue;
    out << csv_field(r->variant.id) << ',' << csv_field(r->variant.label) << ','
        << csv_field(r->variant.config.patch_set) << ',';
    if (r->ok) {
      const auto& m = r->final_test;
      out << "ok," << m.epoch << ',' << to_string(m.split) << ',' << fmt(m.loss) << ',' << fmt(m.top1) << ','
          << fmt(m.top5) << ',' << fmt(m.lr) << ',' << fmt(r->best_test.top1) << ',' << r->parameters.total() << '\n';
    } else {
      out << "failed,,,,,,,,\n";
    }
  }
}

}  // namespace

std::vector<AblationVariant> ablation_grid(const TrainConfig& base, const std::vector<std::string>& patch_sets,
                                           const std::vector<std::string>& components) {
  std::vector<AblationVariant> out;
  for (const auto& set : patch_sets)
    for (const auto& id : components) out.push_back(make_variant(base, set, id));
  return out;
}

std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& variants, const TrainData& data,
                                      const fs::path& out_dir, std::size_t jobs,
                                      const std::function<std::uint64_t(const TrainConfig&)>& hash) {
  fs::create_directories(out_dir);
  std::vector<std::optional<AblationRow>> rows(variants.size());
  auto run_one = [&](std::size_t i) {
    AblationRow row;
    row.variant = variants[i];
    const fs::path dir = out_dir / (variants[i].config.patch_set + "_" + variants[i].id);
    try {
      TrainConfig c = variants[i].config;
      c.jobs = 1;
      const TrainResult r = train(c, data, dir, hash ? hash(c) : 0);
      row.ok = true;
      row.final_test = r.final_test;
      row.best_test = r.best_test;
      row.parameters = r.parameters;
    } catch (const std::exception& e) {
      row.error = e.what();
      std::error_code ec;
      fs::create_directories(dir, ec);
      std::ofstream(dir / "error.txt") << row.error << '\n';
    }
    return row;
  };
  const std::size_t workers = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < variants.size(); start += workers) {
    const std::size_t end = std::min(variants.size(), start + workers);
    std::vector<std::future<AblationRow>> pending;
    for (std::size_t i = start; i < end; ++i) pending.push_back(std::async(std::launch::async, run_one, i));
    for (std::size_t i = start; i < end; ++i) rows[i] = pending[i - start].get();
    write_ablation_csv(out_dir / "ablation.csv", rows);
  }
  if (variants.empty()) write_ablation_csv(out_dir / "ablation.csv", rows);
  std::vector<AblationRow> out;
  for (auto& r : rows) out.push_back(std::move(*r));
  return out;
}

template class Model<float>;
template class Model<double>;
template bool topk_hit(std::span<const float>, std::size_t, std::size_t);
template bool topk_hit(std::span<const double>, std::size_t, std::size_t);
template EvalResult evaluate(Model<float>&, const TrainConfig&, const TrainData&, Split);
template EvalResult evaluate(Model<double>&, const TrainConfig&, const TrainData&, Split);
template Checkpoint make_checkpoint(const Model<float>&, std::size_t, std::uint64_t);
template Checkpoint make_checkpoint(const Model<double>&, std::size_t, std::uint64_t);
template Model<float> load_model(const TrainConfig&, const ModelShape&, const Checkpoint&);
template Model<double> load_model(const TrainConfig&, const ModelShape&, const Checkpoint&);

}  // namespace syd
