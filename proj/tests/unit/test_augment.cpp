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

#include <array>

#include "sydnet/augment.hpp"
#include "sydnet/error.hpp"

namespace syd {
namespace {

cv::Mat gradient_image(int size) {
  cv::Mat img(size, size, CV_8UC3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) img.at<cv::Vec3b>(y, x) = cv::Vec3b(x % 256, y % 256, (x * 7 + y * 3) % 256);
  return img;
}

AugmentConfig plain(int regions) {
  AugmentConfig cfg;
  cfg.rotation_deg = 0;
  cfg.scale_jitter = 0;
  cfg.random_crop = false;
  cfg.erase_regions = regions;
  return cfg;
}

std::vector<float> centre_crop_reference(const cv::Mat& img, std::size_t source, std::size_t crop) {
  std::vector<float> out;
  const std::size_t off = (source - crop) / 2;
  for (std::size_t y = off; y < off + crop; ++y)
    for (std::size_t x = off; x < off + crop; ++x)
      for (int ch = 0; ch < 3; ++ch)
        out.push_back(static_cast<float>(img.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x))[ch]) / 255.0f);
  return out;
}

TEST(AugmentTrain, DisabledPipelineIsCentreCrop) {
  auto img = gradient_image(256);
  Rng rng(1);
  auto out = augment_train(img, plain(0), rng);
  EXPECT_EQ(out.pixels, centre_crop_reference(img, 256, 224));
  EXPECT_TRUE(out.erase.rects.empty());
}

TEST(AugmentTrain, FixedFillIs127) {
  auto img = gradient_image(256);
  Rng rng(2);
  auto cfg = plain(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto out = augment_train(img, cfg, rng);
    ASSERT_EQ(out.erase.rects.size(), 1u);
    auto ref = centre_crop_reference(img, 256, 224);
    const auto& r = out.erase.rects[0];
    for (std::size_t y = 0; y < 224; ++y)
      for (std::size_t x = 0; x < 224; ++x) {
        const bool inside = x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h;
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const std::size_t i = (y * 224 + x) * 3 + ch;
          if (inside) {
            ASSERT_EQ(out.pixels[i], 127.0f / 255.0f);
          } else {
            ASSERT_EQ(out.pixels[i], ref[i]);
          }
        }
      }
  }
}

TEST(AugmentTrain, TwoRegionsDisjointWithinAreaRange) {
  auto img = gradient_image(256);
  Rng rng(3);
  auto cfg = plain(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto out = augment_train(img, cfg, rng);
    ASSERT_EQ(out.erase.rects.size(), 2u);
    EXPECT_FALSE(out.erase.rects[0].overlaps(out.erase.rects[1]));
    const double frac = static_cast<double>(out.erase.rects[0].area() + out.erase.rects[1].area()) / (224.0 * 224.0);
    EXPECT_GE(frac, 0.1);
    EXPECT_LE(frac, 0.8);
  }
}

TEST(AugmentTrain, FullPipelineStaysInUnitRange) {
  auto img = gradient_image(256);
  Rng rng(4);
  AugmentConfig cfg;
  cfg.erase_regions = 2;
  cfg.erase_fill = EraseFill::kRandomRgb;
  for (int trial = 0; trial < 5; ++trial) {
    auto out = augment_train(img, cfg, rng);
    ASSERT_EQ(out.pixels.size(), 224u * 224u * 3u);
    for (float v : out.pixels) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(AugmentTrain, RotationReplicatesEdges) {
  cv::Mat img(64, 64, CV_8UC3, cv::Scalar(40, 80, 120));
  AugmentConfig cfg = plain(0);
  cfg.source_size = 64;
  cfg.crop_size = 64;
  cfg.rotation_deg = 25;
  cfg.scale_jitter = 0.25;
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto out = augment_train(img, cfg, rng);
    for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
      ASSERT_EQ(out.pixels[i], 40.0f / 255.0f);
      ASSERT_EQ(out.pixels[i + 2], 120.0f / 255.0f);
    }
  }
}

TEST(AugmentTrain, SeedDeterminesOutput) {
  auto img = gradient_image(256);
  AugmentConfig cfg;
  cfg.erase_regions = 2;
  cfg.erase_fill = EraseFill::kRandomRgb;
  Rng a(77), b(77);
  auto x = augment_train(img, cfg, a);
  auto y = augment_train(img, cfg, b);
  EXPECT_EQ(x.pixels, y.pixels);
  EXPECT_EQ(x.erase.rects, y.erase.rects);
}

TEST(AugmentTrain, UndersizedImageRejected) {
  Rng rng(6);
  EXPECT_THROW(augment_train(gradient_image(200), AugmentConfig{}, rng), IngestionError);
  EXPECT_THROW(augment_eval(cv::Mat(), AugmentConfig{}), IngestionError);
}

TEST(AugmentTrain, LargerImageIsResized) {
  Rng rng(7);
  auto out = augment_train(gradient_image(300), plain(0), rng);
  EXPECT_EQ(out.pixels.size(), 224u * 224u * 3u);
}

TEST(AugmentEval, DeterministicCentreCrop) {
  auto img = gradient_image(256);
  AugmentConfig cfg;
  auto a = augment_eval(img, cfg);
  auto b = augment_eval(img, cfg);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 224u * 224u * 3u);
  // the crop starts 16 pixels in from each side
  EXPECT_EQ(a[0], 16.0f / 255.0f);
  EXPECT_EQ(a[1], 16.0f / 255.0f);
  EXPECT_EQ(a[(223 * 224 + 223) * 3], 239.0f / 255.0f);
}

TEST(AugmentConfig, Validation) {
  AugmentConfig cfg;
  cfg.crop_size = 300;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = AugmentConfig{};
  cfg.erase_regions = 3;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = AugmentConfig{};
  cfg.erase_area_max = 1.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  EXPECT_NO_THROW(AugmentConfig{}.validate());
}

// --- erase sampling -------------------------------------------------------------

void check_area_statistics(AugmentConfig cfg, std::size_t size) {
  Rng rng(8);
  int fallbacks = 0;
  for (int i = 0; i < 10000; ++i) {
    bool fb = false;
    auto rects = sample_erase_rects(cfg, rng, size, &fb);
    fallbacks += fb;
    ASSERT_EQ(rects.size(), static_cast<std::size_t>(cfg.erase_regions));
    std::size_t covered = 0;
    for (const auto& r : rects) {
      ASSERT_LE(r.x + r.w, size);
      ASSERT_LE(r.y + r.h, size);
      ASSERT_GT(r.area(), 0u);
      covered += r.area();
    }
    if (rects.size() == 2) ASSERT_FALSE(rects[0].overlaps(rects[1]));
    const double frac = static_cast<double>(covered) / static_cast<double>(size * size);
    ASSERT_GE(frac, 0.1);
    ASSERT_LE(frac, 0.8);
  }
  EXPECT_LT(fallbacks, 1000) << "placement rarely needs the strip fallback";
}

TEST(EraseSampling, OneRegionAreaBounds) { check_area_statistics(plain(1), 224); }
TEST(EraseSampling, TwoRegionAreaBounds) { check_area_statistics(plain(2), 224); }
TEST(EraseSampling, SmallImage) { check_area_statistics(plain(2), 32); }

TEST(EraseSampling, IndependentSplit) {
  auto cfg = plain(2);
  cfg.erase_split = EraseSplit::kIndependent;
  check_area_statistics(cfg, 64);
}

TEST(EraseSampling, FallbackStillValid) {
  auto cfg = plain(2);
  cfg.max_placement_attempts = 1;
  cfg.aspect_min = 8.0;
  cfg.aspect_max = 9.0;
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    bool fb = false;
    auto rects = sample_erase_rects(cfg, rng, 50, &fb);
    ASSERT_EQ(rects.size(), 2u);
    EXPECT_FALSE(rects[0].overlaps(rects[1]));
    const double frac = static_cast<double>(rects[0].area() + rects[1].area()) / 2500.0;
    EXPECT_GE(frac, 0.1);
    EXPECT_LE(frac, 0.8);
  }
}

TEST(EraseSampling, SameSeedSameSequence) {
  auto cfg = plain(2);
  Rng a(10), b(10);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_erase_rects(cfg, a, 224), sample_erase_rects(cfg, b, 224));
}

TEST(EraseSampling, RequiresRegions) {
  Rng rng(11);
  EXPECT_THROW(sample_erase_rects(plain(0), rng, 224), ParameterError);
}

TEST(EraseFill, RandomRgbIsUniformPerChannel) {
  cv::Mat img(400, 250, CV_8UC3, cv::Scalar(0, 0, 0));
  EraseRecord rec;
  rec.fill = EraseFill::kRandomRgb;
  rec.rects = {EraseRect{0, 0, 250, 400}};
  Rng rng(12);
  apply_erase(img, rec, rng);
  for (int ch = 0; ch < 3; ++ch) {
    std::array<double, 256> counts{};
    for (int y = 0; y < img.rows; ++y)
      for (int x = 0; x < img.cols; ++x) counts[img.at<cv::Vec3b>(y, x)[ch]] += 1;
    const double expected = 1e5 / 256.0;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 99.9th percentile of chi-square with 255 degrees of freedom
    EXPECT_LT(chi2, 330.52) << "channel " << ch;
  }
}

TEST(EraseFill, PerRectangleColourIsConstant) {
  cv::Mat img(20, 20, CV_8UC3, cv::Scalar(0, 0, 0));
  EraseRecord rec;
  rec.fill = EraseFill::kRandomRgb;
  rec.per_pixel = false;
  rec.rects = {EraseRect{2, 2, 5, 5}};
  Rng rng(13);
  apply_erase(img, rec, rng);
  const auto first = img.at<cv::Vec3b>(2, 2);
  for (int y = 2; y < 7; ++y)
    for (int x = 2; x < 7; ++x) EXPECT_EQ(img.at<cv::Vec3b>(y, x), first);
  EXPECT_EQ(img.at<cv::Vec3b>(0, 0), cv::Vec3b(0, 0, 0));
}

}  // namespace
}  // namespace syd
