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
#include "sydnet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "sydnet/error.hpp"
#include "sydnet/ops.hpp"

namespace syd {

namespace fs = std::filesystem;

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw ConfigError("unknown split '" + text + "' (expected train or test)");
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].split == split) out.push_back(i);
  return out;
}

namespace {

bool has_image_extension(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<fs::path> sorted_children(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Found {
  std::string rel;
  std::string cls;
  Split split;
};

// Image files of one class directory; unreadable files become warnings.
void scan_class(const fs::path& root, const fs::path& class_dir, std::optional<Split> split, std::vector<Found>& found,
                std::vector<std::string>& warnings) {
  const std::string cls = class_dir.filename().string();
  std::size_t kept = 0;
  for (const auto& file : sorted_children(class_dir, false)) {
    if (!has_image_extension(file)) continue;
    const std::string rel = fs::relative(file, root).generic_string();
    if (!cv::haveImageReader(file.string())) {
      warnings.push_back("skipped unreadable image " + rel);
      continue;
    }
    found.push_back({rel, cls, split.value_or(Split::kTrain)});
    ++kept;
  }
  if (kept == 0) warnings.push_back("class directory " + fs::relative(class_dir, root).generic_string() + " is empty");
}

std::map<std::string, Split> read_split_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open split file '" + path.string() + "'");
  std::map<std::string, Split> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string rel, split;
    if (!(fields >> rel >> split)) {
      throw IngestionError(path.string() + ":" + std::to_string(number) + ": expected '<path> <train|test>'");
    }
    try {
      out[rel] = parse_split(split);
    } catch (const ConfigError& e) {
      throw IngestionError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

DatasetManifest scan_dataset(const fs::path& root, SplitLayout layout, const fs::path& split_file) {
  if (!fs::is_directory(root)) throw IngestionError("dataset root '" + root.string() + "' is not a directory");
  DatasetManifest m;
  m.root = root;
  std::vector<Found> found;
  if (layout == SplitLayout::kSplitDirs) {
    for (Split split : {Split::kTrain, Split::kTest}) {
      const fs::path dir = root / to_string(split);
      if (!fs::is_directory(dir)) {
        m.warnings.push_back("missing split directory " + to_string(split));
        continue;
      }
      for (const auto& class_dir : sorted_children(dir, true)) scan_class(root, class_dir, split, found, m.warnings);
    }
  } else {
    if (split_file.empty()) throw IngestionError("split-file layout needs a split file");
    const auto splits = read_split_file(split_file);
    std::vector<Found> all;
    for (const auto& class_dir : sorted_children(root, true)) scan_class(root, class_dir, std::nullopt, all, m.warnings);
    for (auto& f : all) {
      auto it = splits.find(f.rel);
      if (it == splits.end()) {
        m.warnings.push_back("not listed in split file: " + f.rel);
        continue;
      }
      f.split = it->second;
      found.push_back(f);
    }
  }

  std::set<std::string> names;
  for (const auto& f : found) names.insert(f.cls);
  if (names.empty()) throw IngestionError("no image classes found under '" + root.string() + "'");
  m.classes.assign(names.begin(), names.end());
  std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) { return a.rel < b.rel; });
  for (const auto& f : found) {
    const auto label = std::lower_bound(m.classes.begin(), m.classes.end(), f.cls) - m.classes.begin();
    m.entries.push_back({f.rel, static_cast<int>(label), f.split});
  }
  return m;
}

void write_manifest_jsonl(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write manifest '" + path.string() + "'");
  for (const auto& e : manifest.entries) {
    nlohmann::json row{{"path", e.path}, {"class", manifest.classes[static_cast<std::size_t>(e.label)]},
                       {"split", to_string(e.split)}};
    out << row.dump() << '\n';
  }
  if (!out) throw IngestionError("write failed for '" + path.string() + "'");
}

void check_expected_classes(const DatasetManifest& manifest, std::size_t expected) {
  if (manifest.num_classes() != expected) {
    throw IngestionError("dataset has " + std::to_string(manifest.num_classes()) + " classes, expected " +
                         std::to_string(expected));
  }
}

cv::Mat load_rgb(const fs::path& path, std::size_t size) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IngestionError("cannot decode image '" + path.string() + "'");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  const auto s = static_cast<int>(size);
  if (rgb.rows == s && rgb.cols == s) return rgb;
  cv::Mat out;
  const bool shrinking = rgb.rows > s && rgb.cols > s;
  cv::resize(rgb, out, cv::Size(s, s), 0, 0, shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  return out;
}

// --- synthetic ----------------------------------------------------------------

const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names{"disk", "square", "triangle", "cross", "ring", "star"};
  return names;
}

namespace {

std::vector<cv::Point> polygon(cv::Point2d centre, double radius, double angle, std::size_t corners, double inner = 0.0) {
  std::vector<cv::Point> pts;
  const std::size_t steps = inner > 0 ? corners * 2 : corners;
  for (std::size_t i = 0; i < steps; ++i) {
    const double r = (inner > 0 && i % 2 == 1) ? inner : radius;
    const double a = angle + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(steps);
    pts.emplace_back(static_cast<int>(std::lround(centre.x + r * std::cos(a))),
                     static_cast<int>(std::lround(centre.y + r * std::sin(a))));
  }
  return pts;
}

std::vector<cv::Point> bar(cv::Point2d centre, double half_len, double half_width, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<cv::Point> pts;
  for (auto [u, v] : {std::pair{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}}) {
    const double x = u * half_len, y = v * half_width;
    pts.emplace_back(static_cast<int>(std::lround(centre.x + x * c - y * s)),
                     static_cast<int>(std::lround(centre.y + x * s + y * c)));
  }
  return pts;
}

}  // namespace

cv::Mat render_synthetic(std::size_t class_index, std::size_t size, std::uint64_t seed) {
  if (class_index >= synthetic_class_names().size()) throw ParameterError("unknown synthetic class index");
  Rng rng(seed);
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  std::uniform_int_distribution<int> noise(0, 90);
  const int s = static_cast<int>(size);
  cv::Mat img(s, s, CV_8UC3);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>(noise(rng)), static_cast<uchar>(noise(rng)),
                                          static_cast<uchar>(noise(rng)));

  const double d = static_cast<double>(size);
  const double radius = u(0.18, 0.32) * d;
  const cv::Point2d centre(u(radius, d - radius), u(radius, d - radius));
  const double angle = u(0.0, 2.0 * std::numbers::pi);
  const cv::Scalar colour(u(140, 255), u(140, 255), u(140, 255));
  const cv::Point c(static_cast<int>(std::lround(centre.x)), static_cast<int>(std::lround(centre.y)));
  switch (class_index) {
    case 0:
      cv::circle(img, c, static_cast<int>(std::lround(radius)), colour, cv::FILLED, cv::LINE_8);
      break;
    case 1:
      cv::fillConvexPoly(img, polygon(centre, radius, angle, 4), colour, cv::LINE_8);
      break;
    case 2:
      cv::fillConvexPoly(img, polygon(centre, radius, angle, 3), colour, cv::LINE_8);
      break;
    case 3:
      cv::fillConvexPoly(img, bar(centre, radius, radius * 0.3, angle), colour, cv::LINE_8);
      cv::fillConvexPoly(img, bar(centre, radius, radius * 0.3, angle + std::numbers::pi / 2), colour, cv::LINE_8);
      break;
    case 4:
      cv::circle(img, c, static_cast<int>(std::lround(radius * 0.8)), colour,
                 std::max(2, static_cast<int>(std::lround(radius * 0.35))), cv::LINE_8);
      break;
    default: {
      std::vector<std::vector<cv::Point>> star{polygon(centre, radius, angle, 5, radius * 0.45)};
      cv::fillPoly(img, star, colour, cv::LINE_8);
      break;
    }
  }
  return img;
}

void generate_synthetic(const SynthSpec& spec, const fs::path& out) {
  const auto& names = synthetic_class_names();
  if (spec.num_classes < 2 || spec.num_classes > names.size()) {
    throw ParameterError("synthetic num_classes must be in [2, " + std::to_string(names.size()) + "]");
  }
  if (spec.samples_per_class == 0 || spec.image_size < 8) {
    throw ParameterError("synthetic samples_per_class must be positive and image_size at least 8");
  }
  for (Split split : {Split::kTrain, Split::kTest}) {
    const std::size_t count = split == Split::kTrain ? spec.samples_per_class : spec.test_per_class();
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
      const fs::path dir = out / to_string(split) / names[k];
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw IngestionError("cannot create '" + dir.string() + "': " + ec.message());
      for (std::size_t i = 0; i < count; ++i) {
        const auto seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(split), k, i});
        cv::Mat bgr;
        cv::cvtColor(render_synthetic(k, spec.image_size, seed), bgr, cv::COLOR_RGB2BGR);
        char name[32];
        std::snprintf(name, sizeof(name), "%s_%04zu.png", names[k].c_str(), i);
        const fs::path file = dir / name;
        if (!cv::imwrite(file.string(), bgr)) throw IngestionError("cannot write '" + file.string() + "'");
      }
    }
  }
}

// --- batches --------------------------------------------------------------------

BatchIterator::BatchIterator(const DatasetManifest& manifest, Split split, std::size_t batch_size,
                             std::optional<std::uint64_t> shuffle_seed, std::size_t source_size, std::size_t jobs)
    : manifest_(manifest), batch_size_(batch_size), source_size_(source_size), jobs_(std::max<std::size_t>(jobs, 1)) {
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  order_ = manifest.indices(split);
  if (order_.empty()) throw IngestionError("split '" + to_string(split) + "' has no images");
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
}

std::size_t BatchIterator::batch_count() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

bool BatchIterator::next(Batch& batch) {
  batch = Batch{};
  while (cursor_ < order_.size() && batch.entries.empty()) {
    const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
    std::vector<std::size_t> slice(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                   order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    std::vector<cv::Mat> decoded(slice.size());
    auto decode = [&](std::size_t i) {
      try {
        decoded[i] = load_rgb(manifest_.full_path(manifest_.entries[slice[i]]), source_size_);
      } catch (const IngestionError&) {
        decoded[i] = cv::Mat();
      }
    };
    if (jobs_ > 1 && slice.size() > 1) {
      const std::size_t workers = std::min(jobs_, slice.size());
      std::vector<std::future<void>> pending;
      for (std::size_t w = 0; w < workers; ++w) {
        pending.push_back(std::async(std::launch::async, [&, w] {
          for (std::size_t i = w; i < slice.size(); i += workers) decode(i);
        }));
      }
      for (auto& p : pending) p.get();
    } else {
      for (std::size_t i = 0; i < slice.size(); ++i) decode(i);
    }
    for (std::size_t i = 0; i < slice.size(); ++i) {
      const auto& entry = manifest_.entries[slice[i]];
      if (decoded[i].empty()) {
        skipped_.push_back(entry.path);
        continue;
      }
      batch.entries.push_back(slice[i]);
      batch.images.push_back(std::move(decoded[i]));
      batch.labels.push_back(entry.label);
    }
  }
  return !batch.entries.empty();
}

}  // namespace syd
