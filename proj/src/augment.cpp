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
#include "sydnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <opencv2/imgproc.hpp>

#include "sydnet/error.hpp"

namespace syd {

std::string to_string(EraseFill fill) { return fill == EraseFill::kFixed127 ? "fixed_127" : "random_rgb"; }
std::string to_string(EraseSplit split) { return split == EraseSplit::kTotal ? "total" : "independent"; }

void AugmentConfig::validate() const {
  if (crop_size == 0 || crop_size > source_size)
    throw ParameterError("aug.crop_size must be in [1, aug.source_size], got " + std::to_string(crop_size));
  if (erase_regions < 0 || erase_regions > 2)
    throw ParameterError("aug.erase_regions must be 0, 1 or 2, got " + std::to_string(erase_regions));
  if (!(erase_area_min > 0.0 && erase_area_min <= erase_area_max && erase_area_max < 1.0))
    throw ParameterError("aug.erase_area range must satisfy 0 < min <= max < 1");
  if (!(aspect_min > 0.0 && aspect_min <= aspect_max)) throw ParameterError("aug.aspect range is invalid");
  if (!(split_min > 0.0 && split_min <= split_max && split_max < 1.0))
    throw ParameterError("aug.split range must lie inside (0, 1)");
  if (rotation_deg < 0.0 || scale_jitter < 0.0 || scale_jitter >= 1.0)
    throw ParameterError("aug.rotation_deg must be >= 0 and aug.scale_jitter in [0, 1)");
  if (max_placement_attempts < 1) throw ParameterError("aug.max_placement_attempts must be positive");
}

bool EraseRect::overlaps(const EraseRect& o) const {
  return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::size_t uniform_index(Rng& rng, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(0, hi)(rng); }

// Rectangle of roughly `area` pixels with aspect w/h = `aspect`, or nothing
// when it cannot fit.
std::optional<EraseRect> shaped(double area, double aspect, std::size_t size) {
  const auto w = static_cast<std::size_t>(std::lround(std::sqrt(area * aspect)));
  const auto h = static_cast<std::size_t>(std::lround(std::sqrt(area / aspect)));
  if (w == 0 || h == 0 || w > size || h > size) return std::nullopt;
  return EraseRect{0, 0, w, h};
}

// Uniform position for a w x h rectangle among those not overlapping `other`.
// The overlapping positions form one box in (x, y) space, so each row of
// candidates is either complete or has a single gap.
std::optional<EraseRect> place_beside(Rng& rng, std::size_t size, std::size_t w, std::size_t h, const EraseRect& other) {
  const std::size_t nx = size - w + 1, ny = size - h + 1;
  const std::size_t bx0 = other.x + 1 > w ? other.x + 1 - w : 0;
  const std::size_t bx1 = std::min(other.x + other.w, nx);
  const std::size_t by0 = other.y + 1 > h ? other.y + 1 - h : 0;
  const std::size_t by1 = std::min(other.y + other.h, ny);
  const std::size_t gap_x = bx1 > bx0 ? bx1 - bx0 : 0;
  const std::size_t gap_y = by1 > by0 ? by1 - by0 : 0;
  const std::size_t free = nx * ny - gap_x * gap_y;
  if (free == 0) return std::nullopt;
  std::size_t k = uniform_index(rng, free - 1);
  for (std::size_t y = 0; y < ny; ++y) {
    const bool gapped = y >= by0 && y < by1;
    const std::size_t row = gapped ? nx - gap_x : nx;
    if (k >= row) {
      k -= row;
      continue;
    }
    const std::size_t x = gapped && k >= bx0 ? k + gap_x : k;
    return EraseRect{x, y, w, h};
  }
  return std::nullopt;
}

// Full-height strips at the left and right edges; always disjoint and always
// inside the area range.
std::vector<EraseRect> strips(const AugmentConfig& cfg, double total, double share, std::size_t size) {
  const double s = static_cast<double>(size);
  const auto lo = static_cast<std::size_t>(std::ceil(cfg.erase_area_min * s));
  const auto hi = static_cast<std::size_t>(std::floor(cfg.erase_area_max * s));
  auto width = std::clamp(static_cast<std::size_t>(std::lround(total * s)), std::max<std::size_t>(lo, 1), std::max(hi, lo));
  width = std::min(width, size);
  if (cfg.erase_regions == 1) return {EraseRect{0, 0, width, size}};
  width = std::max<std::size_t>(width, 2);
  auto left = std::clamp(static_cast<std::size_t>(std::lround(share * static_cast<double>(width))), std::size_t{1},
                         width - 1);
  return {EraseRect{0, 0, left, size}, EraseRect{size - (width - left), 0, width - left, size}};
}

}  // namespace

std::vector<EraseRect> sample_erase_rects(const AugmentConfig& cfg, Rng& rng, std::size_t img_size,
                                          bool* used_fallback) {
  if (cfg.erase_regions < 1) throw ParameterError("sample_erase_rects needs aug.erase_regions >= 1");
  if (img_size == 0) throw ParameterError("sample_erase_rects needs a non-empty image");
  const double pixels = static_cast<double>(img_size) * static_cast<double>(img_size);
  const auto min_area = static_cast<std::size_t>(std::ceil(cfg.erase_area_min * pixels));
  const auto max_area = static_cast<std::size_t>(std::floor(cfg.erase_area_max * pixels));

  std::vector<double> fractions;
  double total = 0.0, share = 1.0;
  if (cfg.erase_regions == 1) {
    total = uniform(rng, cfg.erase_area_min, cfg.erase_area_max);
    fractions = {total};
  } else if (cfg.erase_split == EraseSplit::kTotal) {
    total = uniform(rng, cfg.erase_area_min, cfg.erase_area_max);
    share = uniform(rng, cfg.split_min, cfg.split_max);
    fractions = {total * share, total * (1.0 - share)};
  } else {
    const double a = uniform(rng, cfg.erase_area_min / 2, cfg.erase_area_max / 2);
    const double b = uniform(rng, cfg.erase_area_min / 2, cfg.erase_area_max / 2);
    total = a + b;
    share = a / total;
    fractions = {a, b};
  }

  if (used_fallback) *used_fallback = false;
  for (int attempt = 0; attempt < cfg.max_placement_attempts; ++attempt) {
    std::vector<EraseRect> rects;
    std::size_t covered = 0;
    bool ok = true;
    for (double f : fractions) {
      auto r = shaped(f * pixels, uniform(rng, cfg.aspect_min, cfg.aspect_max), img_size);
      if (!r) {
        ok = false;
        break;
      }
      if (rects.empty()) {
        r->x = uniform_index(rng, img_size - r->w);
        r->y = uniform_index(rng, img_size - r->h);
      } else {
        r = place_beside(rng, img_size, r->w, r->h, rects.front());
        if (!r) {
          ok = false;
          break;
        }
      }
      covered += r->area();
      rects.push_back(*r);
    }
    if (ok && covered >= min_area && covered <= max_area) return rects;
  }
  if (used_fallback) *used_fallback = true;
  return strips(cfg, total, share, img_size);
}

void apply_erase(cv::Mat& rgb, const EraseRecord& record, Rng& rng) {
  CV_Assert(rgb.type() == CV_8UC3);
  std::uniform_int_distribution<int> byte(0, 255);
  for (const auto& r : record.rects) {
    cv::Vec3b colour(kFixedFillValue, kFixedFillValue, kFixedFillValue);
    if (record.fill == EraseFill::kRandomRgb && !record.per_pixel) {
      colour = cv::Vec3b(static_cast<uchar>(byte(rng)), static_cast<uchar>(byte(rng)), static_cast<uchar>(byte(rng)));
    }
    for (std::size_t y = r.y; y < r.y + r.h; ++y) {
      auto* row = rgb.ptr<cv::Vec3b>(static_cast<int>(y));
      for (std::size_t x = r.x; x < r.x + r.w; ++x) {
        if (record.fill == EraseFill::kRandomRgb && record.per_pixel) {
          for (int ch = 0; ch < 3; ++ch) row[x][ch] = static_cast<uchar>(byte(rng));
        } else {
          row[x] = colour;
        }
      }
    }
  }
}

namespace {

cv::Mat at_source_size(const cv::Mat& image, const AugmentConfig& cfg) {
  if (image.empty() || image.type() != CV_8UC3) throw IngestionError("augmentation expects an 8-bit RGB image");
  const auto s = static_cast<int>(cfg.source_size);
  if (image.rows < s || image.cols < s) {
    throw IngestionError("image " + std::to_string(image.cols) + "x" + std::to_string(image.rows) +
                         " is smaller than aug.source_size " + std::to_string(cfg.source_size));
  }
  if (image.rows == s && image.cols == s) return image.clone();
  cv::Mat out;
  cv::resize(image, out, cv::Size(s, s), 0, 0, cv::INTER_AREA);
  return out;
}

std::vector<float> normalized(const cv::Mat& rgb) {
  std::vector<float> out(rgb.total() * 3);
  std::size_t i = 0;
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<uchar>(y);
    for (int x = 0; x < rgb.cols * 3; ++x) out[i++] = static_cast<float>(row[x]) / 255.0f;
  }
  return out;
}

}  // namespace

AugmentedImage augment_train(const cv::Mat& image, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  cv::Mat src = at_source_size(image, cfg);
  const double angle = cfg.rotation_deg > 0 ? uniform(rng, -cfg.rotation_deg, cfg.rotation_deg) : 0.0;
  const double scale = cfg.scale_jitter > 0 ? uniform(rng, 1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter) : 1.0;
  if (angle != 0.0 || scale != 1.0) {
    const float centre = static_cast<float>(cfg.source_size) / 2.0f;
    cv::Mat m = cv::getRotationMatrix2D(cv::Point2f(centre, centre), angle, scale);
    cv::Mat warped;
    cv::warpAffine(src, warped, m, src.size(), cv::INTER_LINEAR, cv::BORDER_REPLICATE);
    src = warped;
  }

  const std::size_t margin = cfg.source_size - cfg.crop_size;
  const std::size_t ox = cfg.random_crop ? uniform_index(rng, margin) : margin / 2;
  const std::size_t oy = cfg.random_crop ? uniform_index(rng, margin) : margin / 2;
  const auto c = static_cast<int>(cfg.crop_size);
  cv::Mat crop = src(cv::Rect(static_cast<int>(ox), static_cast<int>(oy), c, c)).clone();

  AugmentedImage out;
  out.erase.fill = cfg.erase_fill;
  out.erase.per_pixel = cfg.fill_per_pixel;
  if (cfg.erase_regions > 0) {
    out.erase.rects = sample_erase_rects(cfg, rng, cfg.crop_size, &out.erase.fallback);
    apply_erase(crop, out.erase, rng);
  }
  out.pixels = normalized(crop);
  return out;
}

std::vector<float> augment_eval(const cv::Mat& image, const AugmentConfig& cfg) {
  cfg.validate();
  cv::Mat src = at_source_size(image, cfg);
  const auto offset = static_cast<int>((cfg.source_size - cfg.crop_size) / 2);
  const auto c = static_cast<int>(cfg.crop_size);
  return normalized(src(cv::Rect(offset, offset, c, c)));
}

}  // namespace syd
