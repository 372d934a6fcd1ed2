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

#include "xraysynth/geometry/pose.hpp"
#include "xraysynth/volume/volume.hpp"

namespace xrs::geom {

using vol::ImagePlane;
using vol::Volume;

/// Trilinear sample at continuous voxel coordinates. Zero outside the grid
/// of voxel centres.
double sample_trilinear_zero(const Volume& v, double i, double j, double k);

/// Trilinear sample that clamps to the border voxel anywhere inside the
/// volume's box [-0.5, n - 0.5], and returns zero outside it.
double sample_trilinear_box(const Volume& v, double i, double j, double k);

/// World position (mm, centred) of continuous voxel coordinates, and back.
Vec3 voxel_to_world(const Volume& v, double i, double j, double k);
Vec3 world_to_voxel(const Volume& v, const Vec3& world);

/// Output voxel q (in camera-aligned coordinates about the volume centre)
/// takes the value of V at camera_to_world * q, so that axis 2 of the result
/// runs along the pose's viewing direction. Zero fill outside V.
Volume rotate_volume(const Volume& v, const CameraPose& pose);

/// Maximum over axis 2 (the canonical depth axis). Output is H x W.
ImagePlane max_intensity_projection(const Volume& v);

/// Radiological path integral per detector pixel, unnormalised (mm * mm^-1).
ImagePlane render_path_integral(const Volume& v, const CameraPose& pose, const ProjectionConfig& config);

/// Path integral divided by `norm_scale` and clipped to [0, 1].
ImagePlane render_drr(const Volume& v, const CameraPose& pose, const ProjectionConfig& config,
                      double norm_scale);

/// Path integral along a single ray from `origin` in unit direction `dir`.
double ray_path_integral(const Volume& v, const Vec3& origin, const Vec3& dir, double step_mm);

}  // namespace xrs::geom
