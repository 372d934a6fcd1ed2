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
#include <vector>

#include "json.hpp"
#include "xraysynth/errors.hpp"

namespace xrs::nets {

/// Network widths and depths. The defaults are the desk configuration
/// (32^2 images, 32^3 volumes); full_scale() gives 256^2 / 128^3 with
/// fourteen synthesis layers.
struct ModelConfig {
  int64_t image_size = 32;
  int64_t volume_size = 32;
  int64_t d_c = 128;
  int64_t d_s = 64;
  int64_t d_p = 32;
  int64_t heads = 8;
  double tau = 0.0;  // <= 0 selects sqrt(d_c / heads)

  std::vector<int64_t> ct_channels{4, 8, 16, 16, 16};  // input, 3 downsampling, latent
  std::vector<int64_t> sty_channels{8, 16, 16, 32, 32, 32};
  std::vector<int64_t> disc_channels{16, 32, 32};
  int64_t gen_layers = 0;          // <= 0: derived from image_size
  int64_t gen_content_layers = -1; // < 0: round(L * 8 / 14)
  int64_t gen_channels_max = 32;
  int64_t gen_channels_min = 16;
  int64_t pam_hidden = 128;

  static ModelConfig full_scale();

  /// Throws ConfigError on inconsistent settings.
  void validate() const;

  int64_t synthesis_layers() const;
  int64_t content_layers() const;
  double temperature() const;
  /// Feature-map side length produced by synthesis layer i (1-based).
  int64_t layer_resolution(int64_t i) const;
  int64_t layer_channels(int64_t i) const;

  nlohmann::json to_json() const;
};

/// Style branch strides: two stride-1 convolutions bracket four stride-2 ones.
inline constexpr int kStyleStrides[6] = {1, 2, 2, 2, 2, 1};

}  // namespace xrs::nets
