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
#include "xraysynth/geometry/pose.hpp"
#include "xraysynth/volume/phantom.hpp"

namespace xrs::vol {

struct DatasetConfig {
  uint64_t seed = 0;
  int n_train = 8;
  int n_val = 2;
  int n_style = 8;  // held-out phantoms feeding the pseudo-X-ray domain
  PhantomSpec phantom{};
  geom::ProjectionConfig projection{};
  std::vector<double> horiz_deg{-60.0, -30.0, 0.0, 30.0, 60.0};
  double vert_deg = 0.0;

  void validate() const;
};

struct VolumeEntry {
  std::string id;
  uint64_t seed = 0;
  std::string path;  // base path relative to the dataset root
};

struct DrrEntry {
  std::string volume_id;
  int pose_index = 0;
  std::string path;
};

struct StyleEntry {
  std::string source_id;  // held-out phantom the image was rendered from
  int pose_index = 0;
  uint64_t style_seed = 0;
  std::string path;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<VolumeEntry> train;
  std::vector<VolumeEntry> val;
  std::vector<VolumeEntry> style_volumes;
  std::vector<geom::CameraPose> poses;
  std::vector<DrrEntry> drrs;
  std::vector<StyleEntry> style_images;
  double mu_norm = 1.0;     // dataset-wide max attenuation, maps volumes to [0,1]
  double norm_scale = 1.0;  // dataset-wide max path integral, maps DRRs to [0,1]
  geom::ProjectionConfig projection{};
  nlohmann::json config;    // the DatasetConfig that produced it

  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
  /// DRR of `volume_id` at `pose_index`; throws if absent.
  const DrrEntry& drr(const std::string& volume_id, int pose_index) const;
  const VolumeEntry& volume(const std::string& id) const;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j, const std::filesystem::path& root);

  void save(const std::filesystem::path& file) const;
  static DatasetManifest load(const std::filesystem::path& file);

  /// Checks disjointness and that every referenced file exists and parses.
  void verify() const;
};

nlohmann::json dataset_config_to_json(const DatasetConfig& c);

/// Generates phantoms, renders the DRR sweep for train and val volumes,
/// renders held-out phantoms through the pseudo-X-ray transform and writes
/// `<out>/manifest.json`. On failure every file it wrote is removed.
DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

/// Volume scaled by 1/mu_norm, as fed to the CT encoder.
Volume normalized_volume(const Volume& v, double mu_norm);

}  // namespace xrs::vol
