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
#include "sydnet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include "sydnet/error.hpp"

namespace syd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

template <typename V>
std::string show(V v) {
  if constexpr (std::is_same_v<V, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_integral_v<V>) {
    return std::to_string(v);
  } else {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
    return std::string(buf, end);
  }
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::string to_string(SplitLayout layout) { return layout == SplitLayout::kSplitDirs ? "split_dirs" : "split_file"; }

struct Entry {
  ConfigKey key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// Field accessors keep the table below to one line per key.
template <typename F>
Entry num(std::string key, std::string help, bool model, F field) {
  return {{key, std::move(help), model},
          [field](const RunConfig& c) { return show(field(const_cast<RunConfig&>(c))); },
          [field, key](RunConfig& c, const std::string& v) {
            auto& f = field(c);
            using V = std::remove_reference_t<decltype(f)>;
            if constexpr (std::is_same_v<V, double>) {
              f = parse_double(key, v);
            } else if constexpr (std::is_same_v<V, bool>) {
              f = parse_bool(key, v);
            } else if constexpr (std::is_same_v<V, int>) {
              f = static_cast<int>(parse_u64(key, v));
            } else {
              f = static_cast<V>(parse_u64(key, v));
            }
          }};
}

template <typename F>
Entry text(std::string key, std::string help, bool model, F field) {
  return {{key, std::move(help), model},
          [field](const RunConfig& c) { return field(const_cast<RunConfig&>(c)); },
          [field](RunConfig& c, const std::string& v) { field(c) = v; }};
}

template <typename E, typename F>
Entry choice(std::string key, std::string help, bool model, F field, std::initializer_list<E> options) {
  std::vector<E> opts(options);
  return {{key, std::move(help), model},
          [field](const RunConfig& c) { return to_string(field(const_cast<RunConfig&>(c))); },
          [field, key, opts](RunConfig& c, const std::string& v) {
            for (E e : opts) {
              if (to_string(e) == v) {
                field(c) = e;
                return;
              }
            }
            std::string names;
            for (E e : opts) names += (names.empty() ? "" : " | ") + to_string(e);
            bad_value(key, v, names);
          }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    // data
    t.push_back(text("data.root", "dataset root directory", false, [](RunConfig& c) -> auto& { return c.data.root; }));
    t.push_back(choice("data.layout", "split_dirs (train/<class>, test/<class>) or split_file", false,
                       [](RunConfig& c) -> auto& { return c.data.layout; },
                       {SplitLayout::kSplitDirs, SplitLayout::kSplitFile}));
    t.push_back(text("data.split_file", "'<path> <train|test>' lines for the split_file layout", false,
                     [](RunConfig& c) -> auto& { return c.data.split_file; }));
    t.push_back(text("data.train_features", "SYDF training features (train.mode=frozen_features)", false,
                     [](RunConfig& c) -> auto& { return c.data.train_features; }));
    t.push_back(text("data.test_features", "SYDF test features (train.mode=frozen_features)", false,
                     [](RunConfig& c) -> auto& { return c.data.test_features; }));
    t.push_back(num("data.expect_classes", "required class count, 0 to skip", false,
                    [](RunConfig& c) -> auto& { return c.data.expect_classes; }));
    // backbone
    t.push_back(num("backbone.channels", "reference CNN output channels c", true,
                    [](RunConfig& c) -> auto& { return c.train.backbone_channels; }));
    // patches
    t.push_back(text("patches.set", "P9 | P12 | P16 | P20 | P25 | P30", true,
                     [](RunConfig& c) -> auto& { return c.train.patch_set; }));
    t.push_back(num("patches.grid", "upsampled grid side, 0 for the set's own (48 or 45)", true,
                    [](RunConfig& c) -> auto& { return c.train.patch_grid; }));
    // attention
    t.push_back(num("attention.c_a", "attention width, 0 for max(c/8, 16)", true,
                    [](RunConfig& c) -> auto& { return c.train.head.c_a; }));
    t.push_back(num("attention.include_self", "softmax over patches includes j = i", true,
                    [](RunConfig& c) -> auto& { return c.train.head.include_self; }));
    t.push_back(num("attention.channel", "cross-patch channel attention path", true,
                    [](RunConfig& c) -> auto& { return c.train.head.channel_attention; }));
    t.push_back(num("attention.spatial", "spatial attention path", true,
                    [](RunConfig& c) -> auto& { return c.train.head.spatial_attention; }));
    t.push_back(choice("attention.sa_activation", "softmax | sigmoid", true,
                       [](RunConfig& c) -> auto& { return c.train.head.sa_activation; },
                       {SpatialActivation::kSoftmax, SpatialActivation::kSigmoid}));
    t.push_back(choice("attention.dropout", "gaussian | standard | none", true,
                       [](RunConfig& c) -> auto& { return c.train.head.dropout; },
                       {DropoutKind::kGaussian, DropoutKind::kStandard, DropoutKind::kNone}));
    t.push_back(num("attention.rho", "dropout rate", false, [](RunConfig& c) -> auto& { return c.train.head.rho; }));
    // aug
    t.push_back(num("aug.rotation_deg", "rotation range +-degrees", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.rotation_deg; }));
    t.push_back(num("aug.scale_jitter", "scale range 1 +- jitter", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.scale_jitter; }));
    t.push_back(num("aug.source_size", "decoded image side", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.source_size; }));
    t.push_back(num("aug.crop_size", "network input side, divisible by 32", true,
                    [](RunConfig& c) -> auto& { return c.train.aug.crop_size; }));
    t.push_back(num("aug.random_crop", "random (true) or centre (false) training crop", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.random_crop; }));
    t.push_back(num("aug.erase_regions", "erased regions per image: 0, 1 or 2", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.erase_regions; }));
    t.push_back(num("aug.erase_area_min", "lower bound of the erased area fraction", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.erase_area_min; }));
    t.push_back(num("aug.erase_area_max", "upper bound of the erased area fraction", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.erase_area_max; }));
    t.push_back(num("aug.aspect_min", "erased rectangle aspect lower bound", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.aspect_min; }));
    t.push_back(num("aug.aspect_max", "erased rectangle aspect upper bound", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.aspect_max; }));
    t.push_back(num("aug.split_min", "two-region area split lower bound", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.split_min; }));
    t.push_back(num("aug.split_max", "two-region area split upper bound", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.split_max; }));
    t.push_back(choice("aug.erase_split", "total | independent", false,
                       [](RunConfig& c) -> auto& { return c.train.aug.erase_split; },
                       {EraseSplit::kTotal, EraseSplit::kIndependent}));
    t.push_back(choice("aug.erase_fill", "fixed_127 | random_rgb", false,
                       [](RunConfig& c) -> auto& { return c.train.aug.erase_fill; },
                       {EraseFill::kFixed127, EraseFill::kRandomRgb}));
    t.push_back(num("aug.fill_per_pixel", "random_rgb per pixel (true) or per rectangle (false)", false,
                    [](RunConfig& c) -> auto& { return c.train.aug.fill_per_pixel; }));
    // train
    t.push_back(choice("train.mode", "scratch | frozen_features", true,
                       [](RunConfig& c) -> auto& { return c.train.mode; },
                       {TrainMode::kScratch, TrainMode::kFrozenFeatures}));
    t.push_back(choice("train.baseline", "none | gap | erase_gap | attention", true,
                       [](RunConfig& c) -> auto& { return c.train.baseline; },
                       {Baseline::kNone, Baseline::kGap, Baseline::kEraseGap, Baseline::kAttention}));
    t.push_back(num("train.epochs", "training epochs", false, [](RunConfig& c) -> auto& { return c.train.epochs; }));
    t.push_back(num("train.batch_size", "mini-batch size", false,
                    [](RunConfig& c) -> auto& { return c.train.batch_size; }));
    t.push_back(num("train.lr", "initial SGD learning rate", false, [](RunConfig& c) -> auto& { return c.train.lr; }));
    t.push_back(num("train.lr_step", "epochs between learning-rate decays", false,
                    [](RunConfig& c) -> auto& { return c.train.lr_step; }));
    t.push_back(num("train.lr_decay", "learning-rate decay factor", false,
                    [](RunConfig& c) -> auto& { return c.train.lr_decay; }));
    t.push_back(num("train.seed", "random seed", false, [](RunConfig& c) -> auto& { return c.train.seed; }));
    t.push_back(choice("train.precision", "f32 | f64", true, [](RunConfig& c) -> auto& { return c.train.precision; },
                       {Precision::kFloat32, Precision::kFloat64}));
    t.push_back(num("train.checkpoint_every", "epochs between periodic checkpoints", false,
                    [](RunConfig& c) -> auto& { return c.train.checkpoint_every; }));
    t.push_back(num("train.bn_momentum", "batch-norm running-moment momentum", false,
                    [](RunConfig& c) -> auto& { return c.train.head.bn_momentum; }));
    t.push_back(num("train.bn_eps", "batch-norm epsilon", true, [](RunConfig& c) -> auto& { return c.train.head.bn_eps; }));
    return t;
  }();
  return table;
}

const Entry& entry(const std::string& key) {
  for (const auto& e : entries())
    if (e.key.key == key) return e;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

std::string get_config_value(const RunConfig& config, const std::string& key) { return entry(key).get(config); }

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  entry(key).set(config, value);
}

void apply_config_text(RunConfig& config, std::istream& in, const std::string& source) {
  std::string line, section;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = source + ":" + std::to_string(number) + ": ";
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.find('.') == std::string::npos) {
      if (section.empty()) throw ConfigError(where + "key '" + key + "' outside any section");
      key = section + "." + key;
    }
    try {
      set_config_value(config, key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not section.key=value");
  set_config_value(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  RunConfig config;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot read config file '" + file->string() + "'");
    apply_config_text(config, in, file->string());
  }
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

std::string render_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& e : entries()) {
    const auto dot = e.key.key.find('.');
    const std::string sec = e.key.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << e.key.key.substr(dot + 1) << " = " << e.get(config) << '\n';
  }
  return out.str();
}

std::uint64_t model_config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& e : entries()) {
    if (!e.key.affects_model) continue;
    for (unsigned char ch : e.key.key + "=" + e.get(config) + "\n") {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t model_config_hash(const TrainConfig& train) {
  RunConfig c;
  c.train = train;
  return model_config_hash(c);
}

std::string config_help() {
  const RunConfig defaults;
  std::ostringstream out;
  for (const auto& e : entries()) {
    std::string line = "  " + e.key.key + " = " + e.get(defaults);
    if (line.size() < 40) line.resize(40, ' ');
    out << line << "  " << e.key.help << '\n';
  }
  return out.str();
}

}  // namespace syd
