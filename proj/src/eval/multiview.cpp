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


#include "xraysynth/eval/multiview.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "xraysynth/geometry/render.hpp"

namespace xrs::eval {

using ad::Var;
using nlohmann::json;

vol::ImagePlane Synthesizer::synthesize(const vol::Volume& volume, const geom::CameraPose& pose,
                                        const vol::ImagePlane& style, nets::Domain domain) const {
  if (!model) throw ContractError("Synthesizer: no model");
  const auto& c = model->config();
  if (volume.shape[0] != c.volume_size || volume.shape[1] != c.volume_size || volume.shape[2] != c.volume_size)
    throw ContractError("Synthesizer: volume must be " + std::to_string(c.volume_size) + "^3");
  if (style.height != c.image_size || style.width != c.image_size)
    throw ContractError("Synthesizer: style image must be " + std::to_string(c.image_size) + "^2");
  ad::NoGrad no_grad;
  const auto normalized = vol::normalized_volume(volume, mu_norm);
  const int64_t s = c.volume_size, h = c.image_size;
  auto vol_t = Var<float>::constant(Tensor<float>({1, 1, s, s, s}, normalized.voxels));
  const auto pf = nets::pose_features(pose);
  const auto mf = nets::projection_features(normalized, pose);
  auto pose_t = Var<float>::constant(Tensor<float>({1, 25}, std::vector<float>(pf.begin(), pf.end())));
  auto mip_t = Var<float>::constant(Tensor<float>({1, s * s}, std::vector<float>(mf.begin(), mf.end())));
  auto style_t = Var<float>::constant(Tensor<float>({1, 1, h, h}, style.pixels));
  auto& m = *model;
  auto f_ct = m.encode_ct(vol_t, nets::Mode::kEval);
  auto f = m.pam(f_ct, pose_t, mip_t).output;
  auto out = m.generate(f, m.style(style_t, domain));
  vol::ImagePlane img(h, h);
  std::copy(out.value().data(), out.value().data() + h * h, img.pixels.begin());
  return img;
}

vol::ImagePlane Synthesizer::render(const vol::Volume& volume, const geom::CameraPose& pose) const {
  return geom::render_drr(volume, pose, projection, norm_scale);
}

vol::ImagePlane MultiviewReport::grid() const {
  if (angles.empty()) throw ContractError("MultiviewReport::grid: no angles");
  std::vector<vol::ImagePlane> gt, recon, xray;
  for (const auto& a : angles) {
    gt.push_back(a.gt);
    recon.push_back(a.recon);
    if (a.xray.size() > 0) xray.push_back(a.xray);
  }
  std::vector<vol::ImagePlane> rows{vol::tile_horizontal(gt), vol::tile_horizontal(recon)};
  if (xray.size() == angles.size()) rows.push_back(vol::tile_horizontal(xray));
  return vol::tile_vertical(rows);
}

json MultiviewReport::to_json() const {
  json per = json::array();
  for (const auto& a : angles)
    per.push_back({{"angle_deg", a.angle_deg}, {"trained", a.trained}, {"psnr", a.psnr}, {"ssim", a.ssim}});
  return {{"angles", per},
          {"mean_psnr_trained", mean_psnr_trained},
          {"mean_ssim_trained", mean_ssim_trained},
          {"warnings", warnings}};
}

MultiviewReport multiview_report(const Synthesizer& synth, const vol::Volume& volume,
                                 const std::vector<double>& angles, const std::vector<double>& trained_angles,
                                 const vol::ImagePlane* xray_style) {
  if (angles.empty()) throw ContractError("multiview_report: no angles");
  MultiviewReport r;
  int trained = 0;
  double lo = 0.0, hi = 0.0;
  if (!trained_angles.empty()) {
    const auto [mn, mx] = std::minmax_element(trained_angles.begin(), trained_angles.end());
    lo = *mn;
    hi = *mx;
  }
  for (const double deg : angles) {
    AngleResult a;
    a.angle_deg = deg;
    for (const double t : trained_angles)
      if (std::abs(t - deg) < 1e-9) a.trained = true;
    if (deg < lo - 1e-9 || deg > hi + 1e-9) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "angle %g deg lies outside the training sweep", deg);
      r.warnings.emplace_back(buf);
    }
    const auto pose = geom::pose_from_angles(deg, 0.0, synth.projection);
    a.gt = synth.render(volume, pose);
    a.recon = synth.synthesize(volume, pose, a.gt, nets::Domain::kDrr);
    if (xray_style) a.xray = synth.synthesize(volume, pose, *xray_style, nets::Domain::kXray);
    a.psnr = psnr(a.recon, a.gt);
    a.ssim = ssim(a.recon, a.gt);
    if (a.trained) {
      r.mean_psnr_trained += a.psnr;
      r.mean_ssim_trained += a.ssim;
      ++trained;
    }
    r.angles.push_back(std::move(a));
  }
  if (trained > 0) {
    r.mean_psnr_trained /= trained;
    r.mean_ssim_trained /= trained;
  }
  return r;
}

}  // namespace xrs::eval
