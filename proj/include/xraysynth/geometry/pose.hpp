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
#include <vector>

#include "json.hpp"
#include "xraysynth/errors.hpp"

namespace xrs::geom {

using Mat3 = std::array<double, 9>;  // row-major
using Vec3 = std::array<double, 3>;

/// Cone-beam geometry. SOD is the source-to-isocenter distance and SDD is
/// read as the isocenter-to-detector distance, so the source-to-detector
/// distance is SOD + SDD.
struct ProjectionConfig {
  double sod_mm = 1020.0;
  double sdd_mm = 530.0;
  int64_t det_px = 32;
  double det_pitch_mm = 1.52;  // about 1 mm per pixel at the isocenter
  double step = 0.1;           // in units of the smallest voxel spacing

  void validate() const;
  double source_to_detector() const { return sod_mm + sdd_mm; }
  /// Focal length in pixels.
  double focal_px() const { return source_to_detector() / det_pitch_mm; }

  nlohmann::json to_json() const;
  /// Unknown keys are rejected with a ConfigError naming them.
  static ProjectionConfig from_json(const nlohmann::json& j);
};

struct CameraPose {
  std::array<double, 16> extrinsic{};  // world -> camera, row-major 4x4
  std::array<double, 9> intrinsic{};   // row-major 3x3
  double horiz_deg = 0.0;
  double vert_deg = 0.0;

  static constexpr int kFlatSize = 25;

  /// 16 extrinsic values then 9 intrinsic values, both row-major.
  std::vector<double> flatten() const;
  /// Angles are recovered from the rotation block.
  static CameraPose unflatten(const std::vector<double>& flat);

  Mat3 rotation() const;           // world -> camera
  Mat3 camera_to_world() const;    // transpose of rotation()
  Vec3 translation() const;
  Vec3 source_position() const;    // camera centre in world coordinates

  nlohmann::json to_json() const;
  static CameraPose from_json(const nlohmann::json& j);
};

/// Source orbits the volume centre at radius SOD. Horizontal angle rotates
/// about the vertical world axis, vertical angle tilts about the horizontal
/// one. At (0, 0) the camera looks along +z and the rotation block is I.
CameraPose pose_from_angles(double horiz_deg, double vert_deg, const ProjectionConfig& config);

Mat3 rotation_y(double rad);
Mat3 rotation_x(double rad);
Mat3 matmul3(const Mat3& a, const Mat3& b);
Mat3 transpose3(const Mat3& a);
Vec3 apply3(const Mat3& m, const Vec3& v);
double det3(const Mat3& m);

/// Projects a world point (mm) to detector pixel coordinates (column, row).
std::array<double, 2> project_point(const CameraPose& pose, const Vec3& world);

}  // namespace xrs::geom
