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

#include <string>
#include <vector>

#include "xraysynth/eval/metrics.hpp"
#include "xraysynth/nets/model.hpp"
#include "xraysynth/train/trainer.hpp"

namespace xrs::eval {

/// A trained model plus the dataset constants it was trained under.
struct Synthesizer {
  nets::Model<float>* model = nullptr;
  double mu_norm = 1.0;
  double norm_scale = 1.0;
  geom::ProjectionConfig projection;

  /// One image of a raw attenuation volume at `pose`, styled by `style`
  /// routed through the branch of `domain`.
  vol::ImagePlane synthesize(const vol::Volume& volume, const geom::CameraPose& pose,
                             const vol::ImagePlane& style, nets::Domain domain) const;
  /// Ground-truth DRR under the dataset normalisation.
  vol::ImagePlane render(const vol::Volume& volume, const geom::CameraPose& pose) const;
};

struct AngleResult {
  double angle_deg = 0.0;
  bool trained = false;
  double psnr = 0.0;  // reconstruction (DRR-style) output vs ground-truth DRR
  double ssim = 0.0;
  vol::ImagePlane gt, recon, xray;
};

struct MultiviewReport {
  std::vector<AngleResult> angles;
  std::vector<std::string> warnings;
  double mean_psnr_trained = 0.0;
  double mean_ssim_trained = 0.0;

  /// Rows: ground-truth DRR, DRR-style reconstruction, X-ray-style output
  /// (if a style image was given); one column per angle.
  vol::ImagePlane grid() const;
  nlohmann::json to_json() const;
};

/// Renders and synthesises the volume at each horizontal angle. The DRR
/// style for each column comes from that column's ground truth. Angles not
/// in `trained_angles` are flagged in `warnings` but still evaluated.
MultiviewReport multiview_report(const Synthesizer& synth, const vol::Volume& volume,
                                 const std::vector<double>& angles, const std::vector<double>& trained_angles,
                                 const vol::ImagePlane* xray_style = nullptr);

}  // namespace xrs::eval
