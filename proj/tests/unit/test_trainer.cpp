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
#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <numeric>

#include "support/feature_fixture.hpp"
#include "support/scratch_dir.hpp"
#include "sydnet/config.hpp"
#include "sydnet/error.hpp"
#include "sydnet/trainer.hpp"

namespace syd {
namespace {

using testing::ScratchDir;
using testing::slurp;

// Brute-force top-k: sort class indices by (probability desc, index asc).
bool brute_topk(const std::vector<double>& p, std::size_t label, std::size_t k) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  for (std::size_t i = 0; i < std::min(k, idx.size()); ++i)
    if (idx[i] == label) return true;
  return false;
}

TEST(TopK, TiesGoToLowerIndex) {
  const std::vector<double> p = {0.25, 0.25, 0.25, 0.25};
  EXPECT_TRUE(topk_hit<double>(p, 0, 1));
  EXPECT_FALSE(topk_hit<double>(p, 1, 1));
  EXPECT_TRUE(topk_hit<double>(p, 1, 2));
  EXPECT_FALSE(topk_hit<double>(p, 3, 3));
  EXPECT_TRUE(topk_hit<double>(p, 3, 4));
}

TEST(TopK, SaturatesWhenKCoversAllClasses) {
  const std::vector<double> p = {0.9, 0.1};
  EXPECT_TRUE(topk_hit<double>(p, 1, 5));
  EXPECT_TRUE(topk_hit<double>(p, 1, 2));
  EXPECT_FALSE(topk_hit<double>(p, 1, 1));
}

TEST(TopK, LabelOutOfRange) {
  const std::vector<double> p = {0.5, 0.5};
  EXPECT_THROW(topk_hit<double>(p, 2, 1), LabelError);
}

TEST(TopK, MatchesBruteForceRanking) {
  Rng rng(5);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t L = 2 + static_cast<std::size_t>(trial % 9);
    std::vector<double> p(L);
    for (auto& v : p) v = level(rng) / 4.0;  // coarse levels force ties
    for (std::size_t label = 0; label < L; ++label)
      for (std::size_t k = 1; k <= L + 1; ++k)
        ASSERT_EQ(topk_hit<double>(p, label, k), brute_topk(p, label, k));
  }
}

TEST(TopK, FourSampleOracle) {
  // Softmax of hand-picked logits; samples 0 and 2 are correct at top-1.
  const std::vector<std::vector<double>> logits = {
      {3, 1, 0, 0, 0, 0}, {0, 1, 2, 3, 4, 5}, {0, 0, 5, 1, 0, 0}, {2, 2, 2, 2, 2, 2}};
  const std::vector<std::size_t> labels = {0, 0, 2, 5};
  std::size_t top1 = 0, top5 = 0, brute5 = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> p(6);
    double z = 0;
    for (std::size_t j = 0; j < 6; ++j) z += std::exp(logits[i][j]);
    for (std::size_t j = 0; j < 6; ++j) p[j] = std::exp(logits[i][j]) / z;
    top1 += topk_hit<double>(p, labels[i], 1);
    top5 += topk_hit<double>(p, labels[i], 5);
    brute5 += brute_topk(p, labels[i], 5);
  }
  EXPECT_EQ(100.0 * top1 / 4, 50.0);
  // Sample 1 ranks class 0 last; sample 3 is a full tie so class 5 ranks last.
  EXPECT_EQ(top5, 2u);
  EXPECT_EQ(top5, brute5);
}

TEST(Metrics, RowFormat) {
  MetricsRow r{3, Split::kTest, 0.5, 75.0, 100.0, 0.0007};
  EXPECT_EQ(format_metrics_row(r), "3,test,0.5,75,100,0.0007");
  EXPECT_EQ(std::string(kMetricsHeader), "epoch,split,loss,top1,top5,lr");
}

// ---------------------------------------------------------------------------
// Models and parameter counts
// ---------------------------------------------------------------------------

TEST(ParameterCount, HeadMatchesClosedForm) {
  TrainConfig cfg;
  cfg.mode = TrainMode::kFrozenFeatures;
  const ModelShape shape{7, 7, 128, 4};
  Rng rng(1);
  Model<float> m(cfg, shape, rng);
  const auto c = m.count();
  EXPECT_EQ(c.backbone, 0u);
  EXPECT_EQ(m.head_config().n, 20u);
  EXPECT_EQ(c.head(), head_parameter_count(m.head_config()));
  std::size_t walk = 0;
  for (const auto& p : m.parameters()) walk += p.tensor.numel();
  EXPECT_EQ(walk, c.total());
}

TEST(ParameterCount, ExtraClassesAddDenseWeights) {
  TrainConfig cfg;
  cfg.mode = TrainMode::kFrozenFeatures;
  Rng rng(1);
  const auto four = Model<float>(cfg, {7, 7, 128, 4}, rng).count();
  const auto seven = Model<float>(cfg, {7, 7, 128, 7}, rng).count();
  EXPECT_EQ(seven.total() - four.total(), 128u * 3 + 3);
  EXPECT_EQ(seven.attention(), four.attention());
}

TEST(ParameterCount, GapBaselineHasNoAttention) {
  TrainConfig cfg;
  cfg.mode = TrainMode::kFrozenFeatures;
  cfg.baseline = Baseline::kGap;
  Rng rng(1);
  Model<float> m(cfg, {7, 7, 128, 4}, rng);
  EXPECT_EQ(m.count().attention(), 0u);
  EXPECT_FALSE(m.patches().has_value());
  for (const auto& p : m.parameters()) EXPECT_EQ(p.name.rfind("head.cls.", 0), 0u) << p.name;
}

TEST(ParameterCount, ScratchIncludesBackbone) {
  TrainConfig cfg;
  cfg.aug.source_size = 64;
  cfg.aug.crop_size = 64;
  cfg.backbone_channels = 32;
  const ModelShape shape = scratch_shape(cfg, 4);
  EXPECT_EQ(shape.h, 2u);
  EXPECT_EQ(shape.c, 32u);
  Rng rng(1);
  Model<float> m(cfg, shape, rng);
  EXPECT_TRUE(m.has_backbone());
  EXPECT_EQ(m.count().backbone, ReferenceCnn<float>::parameter_count(32));
  EXPECT_GT(m.count().buffers, 0u);
}

TEST(Model, AttentionBaselineUsesFeatureCells) {
  TrainConfig cfg;
  cfg.mode = TrainMode::kFrozenFeatures;
  cfg.baseline = Baseline::kAttention;
  const HeadConfig h = resolve_head(cfg, {3, 2, 16, 4});
  EXPECT_EQ(h.kind, HeadKind::kAttentionBaseline);
  EXPECT_EQ(h.n, 6u);
}

TEST(Model, LineSearchStepDecreasesLoss) {
  const FeatureGeometry g{3, 3, 16};
  const FeatureFile file = testing::class_features(4, 4, g, 11);
  std::vector<std::size_t> idx(8);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Tensor<double> x = stack_features<double>(file, idx).tensor;
  std::vector<int> labels;
  for (auto i : idx) labels.push_back(static_cast<int>(file.records[i].label));

  TrainConfig cfg;
  cfg.mode = TrainMode::kFrozenFeatures;
  cfg.patch_set = "P9";
  int decreased = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng init(s);
    Model<double> m(cfg, {3, 3, 16, 4}, init);
    auto params = m.parameters();
    auto loss_at = [&] {
      Rng noise(1000 + s);
      auto out = m.forward(x, true, noise);
      return cross_entropy(out.y_pred, std::span<const int>(labels));
    };
    auto before = loss_at();
    before.backward();
    SgdState sgd(1e-5, 50, 0.1);
    sgd_step(params, sgd);
    zero_grad(params);
    decreased += loss_at().item() < before.item();
  }
  EXPECT_EQ(decreased, 20);
}

// ---------------------------------------------------------------------------
// Training runs on frozen features
// ---------------------------------------------------------------------------

class FrozenRun : public ::testing::Test {
 protected:
  void SetUp() override {
    train_ = testing::class_features(6, 3, geometry_, 1);
    test_ = testing::class_features(2, 3, geometry_, 2);
    data_.train_features = &train_;
    data_.test_features = &test_;
    cfg_.mode = TrainMode::kFrozenFeatures;
    cfg_.patch_set = "P9";
    cfg_.epochs = 3;
    cfg_.batch_size = 4;
    cfg_.lr = 0.05;
  }
  FeatureGeometry geometry_{2, 2, 12};
  FeatureFile train_, test_;
  TrainData data_;
  TrainConfig cfg_;
  ScratchDir dir_{"frozen_run"};
};

TEST_F(FrozenRun, WritesRunDirectory) {
  const auto r = train(cfg_, data_, dir_ / "run", 42);
  EXPECT_EQ(r.history.size(), 6u);
  const std::string csv = slurp(dir_ / "run/metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,split,loss,top1,top5,lr");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  for (const char* f : {"log.txt", "checkpoints/best.sydw", "checkpoints/final.sydw", "confusion_final.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir_ / "run" / f)) << f;
  EXPECT_EQ(load_checkpoint(dir_ / "run/checkpoints/final.sydw").config_hash, 42u);
  for (const auto& row : r.history) {
    EXPECT_LE(row.top1, row.top5);
    EXPECT_GE(row.top1, 0.0);
    EXPECT_LE(row.top5, 100.0);
    EXPECT_EQ(row.top5, 100.0);  // L = 3
  }
}

TEST_F(FrozenRun, PeriodicCheckpoints) {
  cfg_.epochs = 4;
  cfg_.checkpoint_every = 2;
  train(cfg_, data_, dir_ / "run", 0);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "run/checkpoints/epoch_0001.sydw"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "run/checkpoints/epoch_0003.sydw"));
  EXPECT_FALSE(std::filesystem::exists(dir_ / "run/checkpoints/epoch_0002.sydw"));
}

TEST_F(FrozenRun, LearningRateTrace) {
  cfg_.lr = 0.007;
  cfg_.lr_step = 1;
  const auto r = train(cfg_, data_, dir_ / "run", 0);
  EXPECT_EQ(r.history[0].lr, 0.007);
  EXPECT_EQ(r.history[1].lr, 0.007);
  EXPECT_EQ(r.history[2].lr, 0.0007);
  EXPECT_EQ(r.history[4].lr, 0.00007);
}

TEST_F(FrozenRun, SeedIdenticalRunsAreByteIdentical) {
  train(cfg_, data_, dir_ / "a", 0);
  train(cfg_, data_, dir_ / "b", 0);
  EXPECT_EQ(slurp(dir_ / "a/metrics.csv"), slurp(dir_ / "b/metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "a/checkpoints/final.sydw"), slurp(dir_ / "b/checkpoints/final.sydw"));
  cfg_.seed = 1;
  train(cfg_, data_, dir_ / "c", 0);
  EXPECT_NE(slurp(dir_ / "a/metrics.csv"), slurp(dir_ / "c/metrics.csv"));
}

TEST_F(FrozenRun, CheckpointReloadIsBitwise) {
  for (Precision p : {Precision::kFloat32, Precision::kFloat64}) {
    cfg_.precision = p;
    const auto run = dir_ / ("run_" + to_string(p));
    train(cfg_, data_, run, 0);
    const Checkpoint ckpt = load_checkpoint(run / "checkpoints/final.sydw");
    const ModelShape shape{2, 2, 12, 3};
    auto compare = [&](auto model) -> EvalResult {
      const EvalResult a = evaluate(model, cfg_, data_, Split::kTest);
      const EvalResult b = evaluate(model, cfg_, data_, Split::kTest);
      EXPECT_EQ(a.probabilities, b.probabilities);
      return a;
    };
    EvalResult first, second;
    if (p == Precision::kFloat32) {
      first = compare(load_model<float>(cfg_, shape, ckpt));
      auto m = load_model<float>(cfg_, shape, ckpt);
      save_checkpoint(run / "again.sydw", make_checkpoint(m, 0, 0));
      second = compare(load_model<float>(cfg_, shape, load_checkpoint(run / "again.sydw")));
    } else {
      first = compare(load_model<double>(cfg_, shape, ckpt));
      auto m = load_model<double>(cfg_, shape, ckpt);
      save_checkpoint(run / "again.sydw", make_checkpoint(m, 0, 0));
      second = compare(load_model<double>(cfg_, shape, load_checkpoint(run / "again.sydw")));
    }
    ASSERT_EQ(first.probabilities.size(), 6u);
    for (std::size_t i = 0; i < first.probabilities.size(); ++i) {
      ASSERT_EQ(std::memcmp(first.probabilities[i].data(), second.probabilities[i].data(), 3 * sizeof(double)), 0);
    }
  }
}

TEST_F(FrozenRun, ConfusionAgreesWithStreamingAccuracy) {
  train(cfg_, data_, dir_ / "run", 0);
  const auto model = load_model<float>(cfg_, {2, 2, 12, 3}, load_checkpoint(dir_ / "run/checkpoints/final.sydw"));
  auto m = model;
  for (Split s : {Split::kTrain, Split::kTest}) {
    const EvalResult r = evaluate(m, cfg_, data_, s);
    std::size_t diag = 0, total = 0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        total += r.confusion[i][j];
        if (i == j) diag += r.confusion[i][j];
      }
    EXPECT_EQ(total, r.labels.size());
    EXPECT_DOUBLE_EQ(100.0 * static_cast<double>(diag) / static_cast<double>(total), r.row.top1);
  }
}

TEST_F(FrozenRun, LearnsSeparableFeatures) {
  cfg_.epochs = 15;
  const auto r = train(cfg_, data_, dir_ / "run", 0);
  EXPECT_EQ(r.final_test.top1, 100.0);
  EXPECT_LT(r.history.back().loss, r.history[1].loss);
}

TEST_F(FrozenRun, GeometryMismatchNamesBothShapes) {
  train(cfg_, data_, dir_ / "run", 0);
  auto m = load_model<float>(cfg_, {2, 2, 12, 3}, load_checkpoint(dir_ / "run/checkpoints/final.sydw"));
  FeatureFile other = testing::class_features(2, 3, {2, 2, 16}, 3);
  TrainData bad = data_;
  bad.test_features = &other;
  try {
    evaluate(m, cfg_, bad, Split::kTest);
    FAIL();
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("(2,2,16,3)"), std::string::npos) << what;
    EXPECT_NE(what.find("(2,2,12,3)"), std::string::npos) << what;
  }
}

TEST_F(FrozenRun, DivergenceAbortsWithGradientNorms) {
  cfg_.lr = 1e30;
  cfg_.epochs = 5;
  cfg_.head.dropout = DropoutKind::kNone;
  try {
    train(cfg_, data_, dir_ / "run", 0);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("grad_norm"), std::string::npos);
  }
  EXPECT_NE(slurp(dir_ / "run/log.txt").find("head.cls.weight grad_norm"), std::string::npos);
}

TEST_F(FrozenRun, Baselines) {
  cfg_.epochs = 2;
  for (Baseline b : {Baseline::kGap, Baseline::kEraseGap, Baseline::kAttention}) {
    cfg_.baseline = b;
    const auto r = train(cfg_, data_, dir_ / ("run_" + to_string(b)), 0);
    EXPECT_EQ(r.history.size(), 4u) << to_string(b);
  }
}

// ---------------------------------------------------------------------------
// Training from images
// ---------------------------------------------------------------------------

class ScratchRun : public ::testing::Test {
 protected:
  void SetUp() override {
    SynthSpec spec;
    spec.num_classes = 2;
    spec.samples_per_class = 4;
    spec.image_size = 40;
    generate_synthetic(spec, dir_ / "data");
    manifest_ = scan_dataset(dir_ / "data", SplitLayout::kSplitDirs);
    data_.manifest = &manifest_;
    cfg_.epochs = 1;
    cfg_.batch_size = 4;
    cfg_.backbone_channels = 16;
    cfg_.aug.source_size = 40;
    cfg_.aug.crop_size = 32;
    cfg_.patch_set = "P9";
  }
  ScratchDir dir_{"scratch_run"};
  DatasetManifest manifest_;
  TrainData data_;
  TrainConfig cfg_;
};

TEST_F(ScratchRun, TenSampleSmoke) {
  ASSERT_EQ(data_.count(Split::kTrain) + data_.count(Split::kTest), 10u);
  const auto r = train(cfg_, data_, dir_ / "run", 0);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.history[0].split, Split::kTrain);
  EXPECT_EQ(r.history[1].split, Split::kTest);
  EXPECT_GT(r.parameters.backbone, 0u);
}

TEST_F(ScratchRun, ParallelDecodeKeepsResults) {
  cfg_.epochs = 2;
  train(cfg_, data_, dir_ / "a", 0);
  cfg_.jobs = 3;
  train(cfg_, data_, dir_ / "b", 0);
  EXPECT_EQ(slurp(dir_ / "a/metrics.csv"), slurp(dir_ / "b/metrics.csv"));
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

TEST(Ablation, GridIsCartesian) {
  const auto v = ablation_grid(TrainConfig{}, {"P12", "P20", "P30"}, {"ca_only", "sa_only", "full"});
  ASSERT_EQ(v.size(), 9u);
  EXPECT_EQ(v[0].label, "Channel attention only: CA_{12}");
  EXPECT_EQ(v[7].label, "Spatial attention only: SA_{30}");
  EXPECT_FALSE(v[0].config.head.spatial_attention);
  EXPECT_TRUE(v[0].config.head.channel_attention);
  EXPECT_FALSE(v[7].config.head.channel_attention);
  EXPECT_EQ(v[8].config.patch_set, "P30");
}

TEST(Ablation, ComponentFlags) {
  auto one = [](const std::string& id) { return ablation_grid(TrainConfig{}, {"P20"}, {id})[0]; };
  EXPECT_EQ(one("sigmoid_sa").config.head.sa_activation, SpatialActivation::kSigmoid);
  EXPECT_EQ(one("general_dropout").config.head.dropout, DropoutKind::kStandard);
  EXPECT_EQ(one("no_gaussian_dropout").config.head.dropout, DropoutKind::kNone);
  EXPECT_EQ(one("erase1_fixed").config.aug.erase_regions, 1u);
  EXPECT_EQ(one("erase1_fixed").config.aug.erase_fill, EraseFill::kFixed127);
  EXPECT_EQ(one("erase2_fixed").config.aug.erase_regions, 2u);
  EXPECT_EQ(one("gap").config.baseline, Baseline::kGap);
  EXPECT_EQ(one("gap").config.effective_aug().erase_regions, 0u);
  EXPECT_EQ(one("erase_gap").config.effective_aug().erase_regions, 2u);
  const auto po = one("patches_only").config.head;
  EXPECT_FALSE(po.channel_attention || po.spatial_attention);
  EXPECT_EQ(one("patches_only").label, "Using P20 only, no attention");
  EXPECT_THROW(one("nonsense"), ConfigError);
  for (const auto& id : ablation_components()) EXPECT_NO_THROW(one(id));
}

TEST(Ablation, FailedVariantDoesNotStopTheSweep) {
  ScratchDir dir("ablation");
  const FeatureFile tr = testing::class_features(3, 2, {2, 2, 8}, 1);
  const FeatureFile te = testing::class_features(1, 2, {2, 2, 8}, 2);
  TrainData data;
  data.train_features = &tr;
  data.test_features = &te;
  TrainConfig base;
  base.mode = TrainMode::kFrozenFeatures;
  base.epochs = 1;
  auto variants = ablation_grid(base, {"P9"}, {"full", "ca_only"});
  variants[0].config.patch_grid = 50;  // 3 does not divide 50
  const auto rows = run_ablation(variants, data, dir.path(), 2, [](const TrainConfig& c) { return model_config_hash(c); });
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].ok);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_TRUE(rows[1].ok);
  const std::string csv = slurp(dir / "ablation.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kAblationHeader);
  EXPECT_NE(csv.find("full,\"P9, 2 erased regions, rand RGB\",P9,failed"), std::string::npos) << csv;
  EXPECT_NE(csv.find("ca_only,Channel attention only: CA_{9},P9,ok,0,test,"), std::string::npos) << csv;

  ScratchDir again("ablation_again");
  run_ablation(variants, data, again.path(), 1, {});
  EXPECT_EQ(slurp(again / "ablation.csv"), csv);
}

}  // namespace
}  // namespace syd
