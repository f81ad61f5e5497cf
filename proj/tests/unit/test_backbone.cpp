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

#include <cstring>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "support/test_util.hpp"
#include "sydnet/backbone.hpp"
#include "sydnet/error.hpp"

namespace syd {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sydnet_backbone_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(ReferenceCnn, OutputGeometry) {
  Rng rng(1);
  ReferenceCnn<float> net(128, rng);
  auto out = net.forward(random_tensor<float>({1, 224, 224, 3}, rng, 0, 1), false);
  EXPECT_EQ(out.tensor.shape(), (Shape{1, 7, 7, 128}));
  EXPECT_EQ(out.source, FeatureSource::kReferenceCnn);
  auto small = net.forward(random_tensor<float>({3, 64, 64, 3}, rng, 0, 1), false);
  EXPECT_EQ(small.tensor.shape(), (Shape{3, 2, 2, 128}));
}

TEST(ReferenceCnn, RejectsIndivisibleSize) {
  Rng rng(2);
  ReferenceCnn<float> net(16, rng);
  EXPECT_THROW(net.forward(Tensor<float>({1, 100, 100, 3}), false), DimensionError);
  EXPECT_THROW(net.forward(Tensor<float>({1, 64, 64, 1}), false), DimensionError);
}

TEST(ReferenceCnn, BatchElementsAreIndependentInEval) {
  Rng rng(3);
  ReferenceCnn<double> net(16, rng);
  auto x = random_tensor({2, 32, 32, 3}, rng, 0, 1);
  auto both = net.forward(x, false).tensor;
  Tensor<double> first({1, 32, 32, 3}, std::vector<double>(x.data().begin(), x.data().begin() + 32 * 32 * 3));
  auto single = net.forward(first, false).tensor;
  for (std::size_t i = 0; i < single.numel(); ++i) EXPECT_NEAR(both.at(i), single.at(i), 1e-12);
}

TEST(ReferenceCnn, ParameterNamesAndCount) {
  Rng rng(4);
  ReferenceCnn<float> net(64, rng);
  auto params = net.parameters();
  std::size_t total = 0;
  for (const auto& [name, t] : params) total += t.numel();
  EXPECT_EQ(total, ReferenceCnn<float>::parameter_count(64));
  EXPECT_EQ(params.front().name, "backbone.block0.conv.weight");
  EXPECT_EQ(ReferenceCnn<float>::block_widths(128), (std::vector<std::size_t>{16, 32, 64, 128, 128}));
  EXPECT_EQ(net.buffers().size(), 2 * ReferenceCnn<float>::kBlocks);
}

TEST(ReferenceCnn, GradientsReachInputAndKernels) {
  Rng rng(5);
  ReferenceCnn<double> net(8, rng);
  auto x = random_tensor({2, 32, 32, 3}, rng, 0, 1, true);
  auto weights = random_tensor({2, 1, 1, 8}, rng);
  auto params = net.parameters();
  // one kernel plus the input keeps the finite-difference sweep short
  NamedTensors<double> checked{params[3 * 3], {"images", x}};
  auto res = check_gradients([&] { return testing::project(net.forward(x, false).tensor, weights); }, checked);
  EXPECT_LT(testing::worst(res), 1e-4);
  // batch statistics over two images are strongly curved; a finer step keeps
  // the central-difference truncation error small
  GradCheckOptions fine;
  fine.rel_step = 1e-5;
  auto train = check_gradients([&] { return testing::project(net.forward(x, true).tensor, weights); }, checked, fine);
  EXPECT_LT(testing::worst(train), 1e-3);
}

TEST(ReferenceCnn, FrozenParametersCollectNoGradient) {
  Rng rng(6);
  ReferenceCnn<float> net(8, rng);
  for (auto& [name, t] : net.parameters()) {
    auto handle = t;
    handle.set_requires_grad(false);
  }
  auto y = net.forward(random_tensor<float>({1, 32, 32, 3}, rng, 0, 1), true).tensor;
  EXPECT_FALSE(y.requires_grad());
}

// --- SYDF ----------------------------------------------------------------------

using FeatureFiles = TempDir;

std::vector<FeatureRecord> sample_records(std::size_t count, std::size_t values, Rng& rng) {
  std::vector<FeatureRecord> records(count);
  std::uniform_real_distribution<float> dist(-3.f, 3.f);
  for (std::size_t i = 0; i < count; ++i) {
    records[i].label = static_cast<std::uint32_t>(i % 3);
    records[i].values.resize(values);
    for (auto& v : records[i].values) v = dist(rng);
  }
  return records;
}

TEST_F(FeatureFiles, RoundTripIsBitwise) {
  Rng rng(7);
  const FeatureGeometry g{2, 3, 4};
  auto records = sample_records(5, g.values(), rng);
  records[1].values[0] = -0.0f;
  write_features(dir_ / "f.sydf", g, records);
  auto file = load_features(dir_ / "f.sydf");
  EXPECT_EQ(file.geometry, g);
  ASSERT_EQ(file.records.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(file.records[i].label, records[i].label);
    EXPECT_EQ(std::memcmp(file.records[i].values.data(), records[i].values.data(), g.values() * sizeof(float)), 0);
  }
  EXPECT_EQ(fs::file_size(dir_ / "f.sydf"), 24u + 5u * (4u + 24u * 4u));
}

TEST_F(FeatureFiles, LayoutIsLittleEndian) {
  write_features(dir_ / "f.sydf", FeatureGeometry{1, 1, 1}, std::vector<FeatureRecord>{{7, {1.0f}}});
  std::ifstream in(dir_ / "f.sydf", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  const std::vector<unsigned char> want{'S', 'Y', 'D', 'F', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0,
                                        1, 0, 0, 0, 7, 0, 0, 0, 0, 0, 0x80, 0x3f};
  EXPECT_EQ(bytes, want);
}

TEST_F(FeatureFiles, StackedMapIsImportedAndFrozen) {
  Rng rng(8);
  const FeatureGeometry g{2, 2, 3};
  auto records = sample_records(4, g.values(), rng);
  write_features(dir_ / "f.sydf", g, records);
  auto file = load_features(dir_ / "f.sydf");
  const std::vector<std::size_t> idx{3, 1};
  auto map = stack_features<float>(file, idx);
  EXPECT_EQ(map.source, FeatureSource::kImported);
  EXPECT_FALSE(map.tensor.requires_grad());
  EXPECT_EQ(map.tensor.shape(), (Shape{2, 2, 2, 3}));
  EXPECT_EQ(map.tensor.at(12), records[1].values[0]);
}

TEST_F(FeatureFiles, TruncationReportsOffset) {
  Rng rng(9);
  write_features(dir_ / "f.sydf", FeatureGeometry{1, 1, 2}, sample_records(3, 2, rng));
  fs::resize_file(dir_ / "f.sydf", 24 + 12 + 6);
  try {
    load_features(dir_ / "f.sydf");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_GE(e.offset(), 36u);
    EXPECT_LE(e.offset(), 42u);
  }
}

TEST_F(FeatureFiles, CountMismatchDetected) {
  Rng rng(10);
  write_features(dir_ / "f.sydf", FeatureGeometry{1, 1, 2}, sample_records(3, 2, rng));
  {
    std::fstream io(dir_ / "f.sydf", std::ios::binary | std::ios::in | std::ios::out);
    io.seekp(8);
    const unsigned char two[4] = {2, 0, 0, 0};
    io.write(reinterpret_cast<const char*>(two), 4);
  }
  EXPECT_THROW(load_features(dir_ / "f.sydf"), FormatError);
}

TEST_F(FeatureFiles, BadMagicAndVersion) {
  Rng rng(11);
  write_features(dir_ / "f.sydf", FeatureGeometry{1, 1, 1}, sample_records(1, 1, rng));
  std::fstream io(dir_ / "f.sydf", std::ios::binary | std::ios::in | std::ios::out);
  io.seekp(4);
  io.put(2);
  io.close();
  try {
    load_features(dir_ / "f.sydf");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  std::ofstream(dir_ / "g.sydf", std::ios::binary) << "SYDW";
  EXPECT_THROW(load_features(dir_ / "g.sydf"), FormatError);
  EXPECT_THROW(load_features(dir_ / "missing.sydf"), IngestionError);
}

TEST_F(FeatureFiles, RecordSizeMismatchOnWrite) {
  std::vector<FeatureRecord> bad{{0, {1.f, 2.f}}};
  EXPECT_THROW(write_features(dir_ / "f.sydf", FeatureGeometry{1, 1, 3}, bad), DimensionError);
}

}  // namespace
}  // namespace syd
