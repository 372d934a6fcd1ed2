/*
 * Copyright 2026 The xraysynth Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "xraysynth/nets/model_config.hpp"
#include "xraysynth/objectives/losses.hpp"
#include "xraysynth/volume/dataset.hpp"

namespace xrs::train {

struct TrainSettings {
  int64_t batch_size = 4;
  double lr = 0.0025;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  int64_t steps = 500;
  int64_t epochs = 0;  // > 0 overrides steps with epochs * ceil(n_train / batch_size)
  int64_t checkpoint_every = 50;
  int64_t preview_every = 100;
  int64_t d_steps = 1;  // discriminator updates per generator update
  std::string r1_mode = "auto";  // auto | exact | fd
  double r1_epsilon = 1e-3;
  int64_t r1_fd_directions = 0;
};

struct EvalSettings {
  uint64_t extractor_seed = 1234;
  std::vector<double> angles{-90, -60, -30, 0, 30, 60, 90};
  int64_t kid_degree = 3;
};

/// The single configuration document shared by every subcommand.
struct Config {
  uint64_t seed = 0;
  std::string dataset_dir = "";  // train/eval read <dataset_dir>/manifest.json
  vol::DatasetConfig dataset{};
  nets::ModelConfig model{};
  obj::LossWeights loss{};
  TrainSettings train{};
  EvalSettings eval{};

  Config();  // desk defaults, with dataset geometry matched to the model

  nlohmann::json to_json() const;
  /// Typed parse of a complete document (see load_config for merging).
  static Config from_json(const nlohmann::json& j);
  void validate() const;

  /// FNV-1a over the canonical JSON, excluding settings that do not change
  /// the optimisation trajectory (step budget and output cadence).
  uint64_t hash() const;
  std::string hash_hex() const;

  int64_t total_steps(int64_t n_train) const;
};

/// Dotted paths present in `user` but absent from `schema`.
std::vector<std::string> unknown_keys(const nlohmann::json& user, const nlohmann::json& schema,
                                      const std::string& prefix = "");

/// Sets `root[a][b]... = value` for "a.b=value". The value is read as JSON
/// when it parses (numbers, booleans, arrays) and as a string otherwise.
void apply_override(nlohmann::json& root, const std::string& assignment);

/// Defaults <- config file (optional) <- overrides. Unknown keys anywhere
/// raise ConfigError listing every offending dotted path.
Config load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);

}  // namespace xrs::train
