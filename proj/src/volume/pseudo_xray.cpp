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


#include "xraysynth/volume/pseudo_xray.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace xrs::vol {

PseudoXrayParams draw_pseudo_xray_params(uint64_t style_seed) {
  std::mt19937_64 rng(style_seed ^ 0x58a7ULL);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  PseudoXrayParams p;
  p.gamma = uni(1.5, 2.5);
  p.black = uni(0.0, 0.08);
  p.white = uni(0.85, 1.0);
  p.noise_gain = uni(0.02, 0.05);
  p.vignette = uni(0.15, 0.35);
  return p;
}

ImagePlane apply_pseudo_xray(const ImagePlane& image, const PseudoXrayParams& p, uint64_t noise_seed) {
  ImagePlane out = image;
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double cy = (static_cast<double>(image.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(image.width) - 1.0) / 2.0;
  const double rmax2 = cy * cy + cx * cx;
  for (int64_t r = 0; r < image.height; ++r)
    for (int64_t c = 0; c < image.width; ++c) {
      double v = std::clamp(static_cast<double>(image.at(r, c)), 0.0, 1.0);
      v = std::pow(v, 1.0 / p.gamma);
      v = std::clamp((v - p.black) / (p.white - p.black), 0.0, 1.0);
      // Draw unconditionally so the noise field does not depend on content.
      const double z = gauss(rng);
      v += p.noise_gain * std::sqrt(v) * z;
      const double dy = static_cast<double>(r) - cy, dx = static_cast<double>(c) - cx;
      const double rr = rmax2 > 0 ? (dy * dy + dx * dx) / rmax2 : 0.0;
      v *= 1.0 - p.vignette * rr;
      out.at(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return out;
}

ImagePlane make_pseudo_xray(const ImagePlane& image, uint64_t style_seed) {
  return apply_pseudo_xray(image, draw_pseudo_xray_params(style_seed), style_seed * 31 + 17);
}

double mean_abs_difference(const ImagePlane& a, const ImagePlane& b) {
  if (a.height != b.height || a.width != b.width)
    throw ContractError("mean_abs_difference: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) s += std::abs(static_cast<double>(a.pixels[i]) - b.pixels[i]);
  return a.pixels.empty() ? 0.0 : s / static_cast<double>(a.pixels.size());
}

}  // namespace xrs::vol
