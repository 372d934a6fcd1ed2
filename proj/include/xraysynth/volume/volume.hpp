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

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "xraysynth/errors.hpp"

namespace xrs::vol {

/// Linear attenuation coefficients (mm^-1) on a regular grid. Axes are
/// (H, W, D), stored C row-major so D varies fastest. World placement: the
/// grid is centred on the origin; axis 0 runs along world y (vertical),
/// axis 1 along world x, axis 2 along world z (the canonical depth axis).
struct Volume {
  std::array<int64_t, 3> shape{0, 0, 0};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  std::vector<float> voxels;

  Volume() = default;
  Volume(std::array<int64_t, 3> shape, std::array<double, 3> spacing, float fill = 0.0f);

  int64_t size() const { return shape[0] * shape[1] * shape[2]; }
  int64_t index(int64_t i, int64_t j, int64_t k) const { return (i * shape[1] + j) * shape[2] + k; }
  float& at(int64_t i, int64_t j, int64_t k) { return voxels[static_cast<size_t>(index(i, j, k))]; }
  float at(int64_t i, int64_t j, int64_t k) const {
    return voxels[static_cast<size_t>(index(i, j, k))];
  }
  float max_value() const;
  double total() const;
};

/// 2D scalar image (DRR, pseudo-X-ray or synthesis output), row-major.
struct ImagePlane {
  int64_t height = 0;
  int64_t width = 0;
  std::array<double, 2> spacing_mm{1.0, 1.0};
  std::vector<float> pixels;

  ImagePlane() = default;
  ImagePlane(int64_t h, int64_t w, float fill = 0.0f);

  int64_t size() const { return height * width; }
  float& at(int64_t r, int64_t c) { return pixels[static_cast<size_t>(r * width + c)]; }
  float at(int64_t r, int64_t c) const { return pixels[static_cast<size_t>(r * width + c)]; }
};

/// Accepts "dir/name", "dir/name.f32" or "dir/name.json" and returns the
/// extension-free base.
std::filesystem::path strip_raw_extension(const std::filesystem::path& p);

/// Writes <base>.f32 (little-endian float32) and <base>.json sidecar
/// {"shape":[H,W,D],"spacing_mm":[...],"dtype":"f32"}.
void save_volume(const Volume& v, const std::filesystem::path& base);
Volume load_volume(const std::filesystem::path& base);

void save_image(const ImagePlane& img, const std::filesystem::path& base);
ImagePlane load_image(const std::filesystem::path& base);

/// 16-bit binary PGM (P5, maxval 65535), values clipped to [0,1].
void write_pgm16(const ImagePlane& img, const std::filesystem::path& path);

/// Row of images side by side, all the same size, separated by `gap` black
/// pixel columns.
ImagePlane tile_horizontal(const std::vector<ImagePlane>& images, int64_t gap = 1);
/// Stacks rows of equal width vertically.
ImagePlane tile_vertical(const std::vector<ImagePlane>& rows, int64_t gap = 1);

/// HU to linear attenuation: mu = mu_water * (1 + HU/1000), clamped at 0.
Volume from_hounsfield(const Volume& hu, double mu_water = 0.02);

}  // namespace xrs::vol
