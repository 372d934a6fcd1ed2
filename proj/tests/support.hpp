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

// Fixtures shared by the unit tests and the acceptance runner.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>

#include "xraysynth/geometry/render.hpp"
#include "xraysynth/train/trainer.hpp"
#include "xraysynth/volume/pseudo_xray.hpp"

namespace xrs::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("xrs_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

/// 16^3 volumes, 16^2 images, two training phantoms.
inline train::Config micro_config() {
  train::Config c;
  c.model.image_size = 16;
  c.model.volume_size = 16;
  c.dataset.phantom.size = 16;
  c.dataset.projection.det_px = 16;
  c.dataset.n_train = 2;
  c.dataset.n_val = 1;
  c.dataset.n_style = 2;
  c.train.batch_size = 2;
  return c;
}

/// Training data built in memory (no files) from the dataset config.
inline train::TrainingData memory_data(const train::Config& c, uint64_t seed = 7) {
  train::TrainingData d;
  const auto& dc = c.dataset;
  for (double h : dc.horiz_deg) d.poses.push_back(geom::pose_from_angles(h, dc.vert_deg, dc.projection));
  for (const auto& p : d.poses) d.pose_feats.push_back(nets::pose_features(p));
  std::vector<vol::Volume> raw;
  double mu = 0.0;
  for (int i = 0; i < dc.n_train; ++i) {
    raw.push_back(vol::generate_phantom(dc.phantom, seed * 101 + static_cast<uint64_t>(i)));
    mu = std::max(mu, static_cast<double>(raw.back().max_value()));
  }
  double scale = 0.0;
  std::vector<std::vector<vol::ImagePlane>> paths;
  for (const auto& v : raw) {
    std::vector<vol::ImagePlane> row;
    for (const auto& p : d.poses) {
      row.push_back(geom::render_path_integral(v, p, dc.projection));
      for (float x : row.back().pixels) scale = std::max(scale, static_cast<double>(x));
    }
    paths.push_back(std::move(row));
  }
  for (size_t i = 0; i < raw.size(); ++i) {
    d.volume_ids.push_back("mem_" + std::to_string(i));
    d.volumes.push_back(vol::normalized_volume(raw[i], mu));
    std::vector<vol::ImagePlane> drrs;
    std::vector<std::vector<double>> mips;
    for (size_t p = 0; p < d.poses.size(); ++p) {
      drrs.push_back(geom::render_drr(raw[i], d.poses[p], dc.projection, scale));
      mips.push_back(nets::projection_features(d.volumes.back(), d.poses[p]));
    }
    d.drrs.push_back(std::move(drrs));
    d.mips.push_back(std::move(mips));
  }
  for (int i = 0; i < dc.n_style; ++i) {
    const auto v = vol::generate_phantom(dc.phantom, seed * 977 + 13 + static_cast<uint64_t>(i));
    const auto drr = geom::render_drr(v, d.poses[static_cast<size_t>(i) % d.poses.size()], dc.projection, scale);
    d.style_images.push_back(vol::make_pseudo_xray(drr, seed * 31 + static_cast<uint64_t>(i)));
  }
  d.volume_size = dc.phantom.size;
  d.image_size = dc.projection.det_px;
  return d;
}

inline ad::Tensor<double> random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

}  // namespace xrs::testing
