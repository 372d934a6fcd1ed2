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
#include <optional>
#include <string>
#include <vector>

namespace xrs::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Flags shared by the config-driven subcommands.
struct CommonOptions {
  fs::path config;                // optional JSON file
  std::optional<uint64_t> seed;   // shorthand for --set seed=N (dataset: dataset.seed=N)
  fs::path out;
  std::vector<std::string> sets;  // dotted key=value overrides
};

struct TrainOptions : CommonOptions {
  fs::path dataset;  // overrides dataset_dir
  fs::path resume;   // checkpoint directory
};

struct SynthOptions {
  fs::path checkpoint;
  fs::path volume;  // raw attenuation volume base path
  std::vector<double> angles{0.0};
  fs::path style;   // optional style image base path
  std::string style_domain = "xray";
  fs::path out;
};

struct EvalOptions {
  fs::path checkpoint;
  fs::path dataset;  // defaults to the checkpoint's dataset_dir
  std::vector<std::string> sets;  // eval.* overrides
  fs::path out;
};

struct RenderOptions : CommonOptions {
  fs::path volume;
  double angle = 0.0;
  double vert = 0.0;
};

// Each returns an exit code; configuration problems throw ConfigError and
// runtime failures propagate as exceptions (see run).
int cmd_dataset(const CommonOptions& o);
int cmd_train(const TrainOptions& o);
int cmd_synth(const SynthOptions& o);
int cmd_eval(const EvalOptions& o);
int cmd_render(const RenderOptions& o);

/// Parses argv, dispatches, and maps exceptions to exit codes: 2 for
/// configuration and usage errors, 3 for runtime aborts.
int run(int argc, char** argv);

}  // namespace xrs::cli
