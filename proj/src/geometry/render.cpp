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


#include "xraysynth/geometry/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace xrs::geom {

namespace {

// Axis 0 runs along world y, axis 1 along world x, axis 2 along world z.
double centre(int64_t n) { return (static_cast<double>(n) - 1.0) / 2.0; }

double lerp(double a, double b, double t) { return a + (b - a) * t; }

double trilinear_clamped(const Volume& v, double i, double j, double k) {
  const double ci[3] = {std::clamp(i, 0.0, static_cast<double>(v.shape[0] - 1)),
                        std::clamp(j, 0.0, static_cast<double>(v.shape[1] - 1)),
                        std::clamp(k, 0.0, static_cast<double>(v.shape[2] - 1))};
  int64_t lo[3], hi[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = static_cast<int64_t>(std::floor(ci[a]));
    hi[a] = std::min(lo[a] + 1, v.shape[static_cast<size_t>(a)] - 1);
    f[a] = ci[a] - static_cast<double>(lo[a]);
  }
  const double c00 = lerp(v.at(lo[0], lo[1], lo[2]), v.at(lo[0], lo[1], hi[2]), f[2]);
  const double c01 = lerp(v.at(lo[0], hi[1], lo[2]), v.at(lo[0], hi[1], hi[2]), f[2]);
  const double c10 = lerp(v.at(hi[0], lo[1], lo[2]), v.at(hi[0], lo[1], hi[2]), f[2]);
  const double c11 = lerp(v.at(hi[0], hi[1], lo[2]), v.at(hi[0], hi[1], hi[2]), f[2]);
  return lerp(lerp(c00, c01, f[1]), lerp(c10, c11, f[1]), f[0]);
}

}  // namespace

double sample_trilinear_zero(const Volume& v, double i, double j, double k) {
  const double p[3] = {i, j, k};
  int64_t lo[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] > -1.0) || !(p[a] < static_cast<double>(v.shape[static_cast<size_t>(a)]))) return 0.0;
    lo[a] = static_cast<int64_t>(std::floor(p[a]));
    f[a] = p[a] - static_cast<double>(lo[a]);
  }
  double acc = 0.0;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk) {
        const int64_t ii = lo[0] + di, jj = lo[1] + dj, kk = lo[2] + dk;
        if (ii < 0 || jj < 0 || kk < 0 || ii >= v.shape[0] || jj >= v.shape[1] || kk >= v.shape[2]) continue;
        const double w = (di ? f[0] : 1.0 - f[0]) * (dj ? f[1] : 1.0 - f[1]) * (dk ? f[2] : 1.0 - f[2]);
        if (w != 0.0) acc += w * v.at(ii, jj, kk);
      }
  return acc;
}

double sample_trilinear_box(const Volume& v, double i, double j, double k) {
  const double p[3] = {i, j, k};
  for (int a = 0; a < 3; ++a)
    if (p[a] < -0.5 || p[a] > static_cast<double>(v.shape[static_cast<size_t>(a)]) - 0.5) return 0.0;
  return trilinear_clamped(v, i, j, k);
}

Vec3 voxel_to_world(const Volume& v, double i, double j, double k) {
  return {(j - centre(v.shape[1])) * v.spacing_mm[1], (i - centre(v.shape[0])) * v.spacing_mm[0],
          (k - centre(v.shape[2])) * v.spacing_mm[2]};
}

Vec3 world_to_voxel(const Volume& v, const Vec3& w) {
  return {w[1] / v.spacing_mm[0] + centre(v.shape[0]), w[0] / v.spacing_mm[1] + centre(v.shape[1]),
          w[2] / v.spacing_mm[2] + centre(v.shape[2])};
}

Volume rotate_volume(const Volume& v, const CameraPose& pose) {
  const Mat3 c2w = pose.camera_to_world();
  Volume out(v.shape, v.spacing_mm);
  for (int64_t i = 0; i < v.shape[0]; ++i)
    for (int64_t j = 0; j < v.shape[1]; ++j)
      for (int64_t k = 0; k < v.shape[2]; ++k) {
        const Vec3 q = voxel_to_world(v, static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
        const Vec3 src = world_to_voxel(v, apply3(c2w, q));
        out.at(i, j, k) = static_cast<float>(sample_trilinear_zero(v, src[0], src[1], src[2]));
      }
  return out;
}

ImagePlane max_intensity_projection(const Volume& v) {
  ImagePlane img(v.shape[0], v.shape[1]);
  img.spacing_mm = {v.spacing_mm[0], v.spacing_mm[1]};
  for (int64_t i = 0; i < v.shape[0]; ++i)
    for (int64_t j = 0; j < v.shape[1]; ++j) {
      float m = v.at(i, j, 0);
      for (int64_t k = 1; k < v.shape[2]; ++k) m = std::max(m, v.at(i, j, k));
      img.at(i, j) = m;
    }
  return img;
}

double ray_path_integral(const Volume& v, const Vec3& o, const Vec3& d, double step_mm) {
  // Slab intersection with the volume box in world coordinates.
  const double half[3] = {static_cast<double>(v.shape[1]) * v.spacing_mm[1] / 2.0,
                          static_cast<double>(v.shape[0]) * v.spacing_mm[0] / 2.0,
                          static_cast<double>(v.shape[2]) * v.spacing_mm[2] / 2.0};
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[static_cast<size_t>(a)]) < 1e-15) {
      if (std::abs(o[static_cast<size_t>(a)]) > half[a]) return 0.0;
      continue;
    }
    double ta = (-half[a] - o[static_cast<size_t>(a)]) / d[static_cast<size_t>(a)];
    double tb = (half[a] - o[static_cast<size_t>(a)]) / d[static_cast<size_t>(a)];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  t0 = std::max(t0, 0.0);
  if (!(t1 > t0)) return 0.0;
  const double len = t1 - t0;
  const auto n = static_cast<int64_t>(std::ceil(len / step_mm - 1e-9));
  const double h = len / static_cast<double>(std::max<int64_t>(n, 1));
  double acc = 0.0;
  for (int64_t s = 0; s < std::max<int64_t>(n, 1); ++s) {
    const double t = t0 + (static_cast<double>(s) + 0.5) * h;
    const Vec3 p{o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]};
    const Vec3 q = world_to_voxel(v, p);
    acc += sample_trilinear_box(v, q[0], q[1], q[2]);
  }
  return acc * h;
}

ImagePlane render_path_integral(const Volume& v, const CameraPose& pose, const ProjectionConfig& config) {
  config.validate();
  const double min_spacing = std::min({v.spacing_mm[0], v.spacing_mm[1], v.spacing_mm[2]});
  const double step_mm = config.step * min_spacing;
  const Mat3 c2w = pose.camera_to_world();
  const Vec3 src = pose.source_position();
  const auto& k = pose.intrinsic;
  ImagePlane img(config.det_px, config.det_px);
  const double mag = config.source_to_detector() / config.sod_mm;
  img.spacing_mm = {config.det_pitch_mm / mag, config.det_pitch_mm / mag};
  for (int64_t r = 0; r < config.det_px; ++r)
    for (int64_t c = 0; c < config.det_px; ++c) {
      const double y = (static_cast<double>(r) - k[5]) / k[4];
      const double x = (static_cast<double>(c) - k[2] - k[1] * y) / k[0];
      Vec3 d = apply3(c2w, Vec3{x, y, 1.0});
      const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
      for (auto& e : d) e /= norm;
      img.at(r, c) = static_cast<float>(ray_path_integral(v, src, d, step_mm));
    }
  return img;
}

ImagePlane render_drr(const Volume& v, const CameraPose& pose, const ProjectionConfig& config,
                      double norm_scale) {
  if (!(norm_scale > 0.0)) throw ContractError("render_drr: norm_scale must be > 0");
  ImagePlane img = render_path_integral(v, pose, config);
  for (auto& p : img.pixels) p = static_cast<float>(std::clamp(static_cast<double>(p) / norm_scale, 0.0, 1.0));
  return img;
}

}  // namespace xrs::geom
