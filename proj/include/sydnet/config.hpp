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
#ifndef SYDNET_CONFIG_HPP_
#define SYDNET_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sydnet/trainer.hpp"

namespace syd {

struct DataConfig {
  std::string root;
  SplitLayout layout = SplitLayout::kSplitDirs;
  std::string split_file;
  std::string train_features;  ///< SYDF, frozen_features mode
  std::string test_features;
  std::size_t expect_classes = 0;  ///< 0 skips the check
};

struct RunConfig {
  DataConfig data;
  TrainConfig train;
};

struct ConfigKey {
  std::string key;  ///< "section.name"
  std::string help;
  bool affects_model = false;  ///< part of the checkpoint compatibility hash
};

/// Every accepted key in rendering order.
const std::vector<ConfigKey>& config_keys();

std::string get_config_value(const RunConfig& config, const std::string& key);
/// Throws ConfigError for unknown keys and unparsable values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// INI text: [section] headers, key = value lines, '#' or ';' comments.
void apply_config_text(RunConfig& config, std::istream& in, const std::string& source);

/// "section.key=value"
void apply_override(RunConfig& config, const std::string& assignment);

/// Defaults, then the file (if any), then overrides in order.
RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

/// Complete effective configuration in the file format.
std::string render_config(const RunConfig& config);

/// FNV-1a 64 over the rendered model-affecting keys.
std::uint64_t model_config_hash(const RunConfig& config);
std::uint64_t model_config_hash(const TrainConfig& train);

/// Key, default and description for every key, for --help.
std::string config_help();

}  // namespace syd

#endif  // SYDNET_CONFIG_HPP_
