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

#include "support/scratch_dir.hpp"
#include "support/test_util.hpp"
#include "sydnet/checkpoint.hpp"
#include "sydnet/error.hpp"

namespace syd {
namespace {

using testing::ScratchDir;
using testing::slurp;
using testing::spit;

NamedTensors<float> sample_f32(Rng& rng) {
  return {{"a.weight", testing::random_tensor<float>({3, 4}, rng)},
          {"a.bias", testing::random_tensor<float>({4}, rng)},
          {"scalar", testing::random_tensor<float>({1}, rng)}};
}

TEST(Checkpoint, RoundTripIsBitwise) {
  ScratchDir dir("ckpt_rt");
  Rng rng(3);
  auto f = sample_f32(rng);
  NamedTensors<double> d = {{"b.weight", testing::random_tensor<double>({2, 2, 5}, rng)}};
  Checkpoint ckpt;
  ckpt.config_hash = 0x0123456789abcdefULL;
  append_tensors(ckpt, f);
  append_tensors(ckpt, d);
  save_checkpoint(dir / "c.sydw", ckpt);
  const Checkpoint back = load_checkpoint(dir / "c.sydw");
  EXPECT_EQ(back.config_hash, ckpt.config_hash);
  ASSERT_EQ(back.tensors.size(), 4u);
  EXPECT_EQ(back.tensors[0].dtype, Dtype::kFloat32);
  EXPECT_EQ(back.tensors[3].dtype, Dtype::kFloat64);

  Rng other(99);
  auto f2 = sample_f32(other);
  restore_tensors(back, f2);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto a = f[i].tensor.data();
    const auto b = f2[i].tensor.data();
    ASSERT_EQ(std::memcmp(a.data(), b.data(), a.size_bytes()), 0) << f[i].name;
  }
  NamedTensors<double> d2 = {{"b.weight", Tensor<double>({2, 2, 5})}};
  restore_tensors(back, d2);
  EXPECT_EQ(std::memcmp(d[0].tensor.data().data(), d2[0].tensor.data().data(), 20 * sizeof(double)), 0);
}

TEST(Checkpoint, ByteLayout) {
  ScratchDir dir("ckpt_layout");
  Checkpoint ckpt;
  ckpt.config_hash = 0x1122334455667788ULL;
  append_tensors(ckpt, NamedTensors<float>{{"w", Tensor<float>({2}, std::vector<float>{1.0f, -2.0f})}});
  save_checkpoint(dir / "c.sydw", ckpt);
  const std::string bytes = slurp(dir / "c.sydw");
  // magic 4 + version 4 + count 4 + name_len 2 + name 1 + dtype 1 + rank 1 + dim 4 + data 8 + hash 8
  ASSERT_EQ(bytes.size(), 37u);
  EXPECT_EQ(bytes.substr(0, 4), "SYDW");
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[off + static_cast<std::size_t>(i)]);
    return v;
  };
  EXPECT_EQ(u32(4), 1u);
  EXPECT_EQ(u32(8), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[13]), 0);
  EXPECT_EQ(bytes[14], 'w');
  EXPECT_EQ(static_cast<unsigned char>(bytes[15]), 0);  // f32
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 1);  // rank
  EXPECT_EQ(u32(17), 2u);
  float first = 0;
  std::memcpy(&first, bytes.data() + 21, 4);
  EXPECT_EQ(first, 1.0f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[29]), 0x88);
  EXPECT_EQ(static_cast<unsigned char>(bytes[36]), 0x11);
}

class CheckpointCorrupt : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(1);
    Checkpoint ckpt;
    append_tensors(ckpt, sample_f32(rng));
    save_checkpoint(dir_ / "c.sydw", ckpt);
    bytes_ = slurp(dir_ / "c.sydw");
  }
  void expect_format_error(const std::string& bytes) {
    spit(dir_ / "bad.sydw", bytes);
    EXPECT_THROW(load_checkpoint(dir_ / "bad.sydw"), FormatError);
  }
  ScratchDir dir_{"ckpt_bad"};
  std::string bytes_;
};

TEST_F(CheckpointCorrupt, BadMagic) {
  std::string b = bytes_;
  b[0] = 'X';
  expect_format_error(b);
}

TEST_F(CheckpointCorrupt, BadVersion) {
  std::string b = bytes_;
  b[4] = 2;
  expect_format_error(b);
}

TEST_F(CheckpointCorrupt, BadDtype) {
  std::string b = bytes_;
  b[12 + 2 + 8] = 7;  // dtype byte of "a.weight"
  expect_format_error(b);
}

TEST_F(CheckpointCorrupt, EveryTruncationFails) {
  for (std::size_t len = 0; len < bytes_.size(); len += 3) expect_format_error(bytes_.substr(0, len));
}

TEST_F(CheckpointCorrupt, TrailingBytes) { expect_format_error(bytes_ + "x"); }

TEST_F(CheckpointCorrupt, HugeTensorCountDoesNotAllocate) {
  std::string b = bytes_;
  b[8] = b[9] = b[10] = b[11] = static_cast<char>(0xff);
  expect_format_error(b);
}

TEST(Checkpoint, MissingFile) { EXPECT_THROW(load_checkpoint("/nonexistent/dir/c.sydw"), Error); }

TEST(Checkpoint, RestoreMissingName) {
  Rng rng(2);
  Checkpoint ckpt;
  append_tensors(ckpt, sample_f32(rng));
  NamedTensors<float> want = {{"not.there", Tensor<float>({1})}};
  EXPECT_THROW(restore_tensors(ckpt, want), FormatError);
}

TEST(Checkpoint, RestoreShapeMismatch) {
  Rng rng(2);
  Checkpoint ckpt;
  append_tensors(ckpt, sample_f32(rng));
  NamedTensors<float> want = {{"a.weight", Tensor<float>({4, 3})}};
  EXPECT_THROW(restore_tensors(ckpt, want), DimensionError);
}

TEST(Checkpoint, FindByName) {
  Rng rng(2);
  Checkpoint ckpt;
  append_tensors(ckpt, sample_f32(rng));
  ASSERT_NE(ckpt.find("a.bias"), nullptr);
  EXPECT_EQ(ckpt.find("a.bias")->shape, (Shape{4}));
  EXPECT_EQ(ckpt.find("zzz"), nullptr);
}

}  // namespace
}  // namespace syd
