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

#include "xraysynth/volume/volume.hpp"

namespace xrs::vol {

/// Appearance parameters of the synthetic X-ray style domain.
struct PseudoXrayParams {
  double gamma = 2.0;       // output = input^(1/gamma), gamma in [1.5, 2.5]
  double black = 0.0;       // contrast stretch: (v - black) / (white - black)
  double white = 1.0;
  double noise_gain = 0.03; // noise sigma = noise_gain * sqrt(intensity)
  double vignette = 0.25;   // multiplicative 1 - vignette * r^2, r = 1 at the corners
};

PseudoXrayParams draw_pseudo_xray_params(uint64_t style_seed);

/// Input in [0,1]. Output clipped to [0,1]; deterministic per seed.
ImagePlane make_pseudo_xray(const ImagePlane& image, uint64_t style_seed);
ImagePlane apply_pseudo_xray(const ImagePlane& image, const PseudoXrayParams& params,
                             uint64_t noise_seed);

double mean_abs_difference(const ImagePlane& a, const ImagePlane& b);

}  // namespace xrs::vol
