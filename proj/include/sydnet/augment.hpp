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
#ifndef SYDNET_AUGMENT_HPP_
#define SYDNET_AUGMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "sydnet/ops.hpp"

namespace syd {

enum class EraseFill { kFixed127, kRandomRgb };

/// How the total erased area is shared between two regions.
enum class EraseSplit {
  kTotal,        ///< one total area, split U(split_min, split_max)
  kIndependent,  ///< each region draws half the area range on its own
};

std::string to_string(EraseFill fill);
std::string to_string(EraseSplit split);

struct AugmentConfig {
  double rotation_deg = 25.0;
  double scale_jitter = 0.25;
  std::size_t source_size = 256;
  std::size_t crop_size = 224;
  bool random_crop = true;
  int erase_regions = 0;  ///< 0, 1 or 2
  double erase_area_min = 0.1;
  double erase_area_max = 0.8;
  double aspect_min = 0.5;
  double aspect_max = 2.0;
  double split_min = 0.3;
  double split_max = 0.7;
  EraseSplit erase_split = EraseSplit::kTotal;
  EraseFill erase_fill = EraseFill::kFixed127;
  bool fill_per_pixel = true;  ///< random_rgb only: false paints one colour per rectangle
  int max_placement_attempts = 50;

  /// Throws ParameterError on an inconsistent configuration.
  void validate() const;
};

inline constexpr std::uint8_t kFixedFillValue = 127;

struct EraseRect {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t w = 0;
  std::size_t h = 0;

  std::size_t area() const { return w * h; }
  bool overlaps(const EraseRect& o) const;
  bool operator==(const EraseRect&) const = default;
};

struct EraseRecord {
  std::vector<EraseRect> rects;
  EraseFill fill = EraseFill::kFixed127;
  bool per_pixel = true;
  bool fallback = false;  ///< placement fell back to full-height strips
};

/// Rectangles for an img_size x img_size image. Total area fraction lies in
/// [erase_area_min, erase_area_max]; two rectangles never share a pixel.
std::vector<EraseRect> sample_erase_rects(const AugmentConfig& cfg, Rng& rng, std::size_t img_size,
                                          bool* used_fallback = nullptr);

/// Overwrites `rects` in an 8-bit RGB image.
void apply_erase(cv::Mat& rgb, const EraseRecord& record, Rng& rng);

struct AugmentedImage {
  std::vector<float> pixels;  ///< crop x crop x 3, HWC, values in [0, 1]
  EraseRecord erase;
};

/// Rotation and scale jitter, crop, erasing, /255. `image` is 8-bit RGB,
/// at least source_size on each side (larger inputs are resized down).
AugmentedImage augment_train(const cv::Mat& image, const AugmentConfig& cfg, Rng& rng);

/// Deterministic centre crop and /255.
std::vector<float> augment_eval(const cv::Mat& image, const AugmentConfig& cfg);

}  // namespace syd

#endif  // SYDNET_AUGMENT_HPP_
