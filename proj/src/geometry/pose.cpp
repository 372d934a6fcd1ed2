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


#include "xraysynth/geometry/pose.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace xrs::geom {

using nlohmann::json;

void ProjectionConfig::validate() const {
  if (!(sod_mm > 0.0) || !(sdd_mm > 0.0)) throw ContractError("ProjectionConfig: distances must be > 0");
  if (det_px < 1) throw ContractError("ProjectionConfig: det_px must be >= 1");
  if (!(det_pitch_mm > 0.0)) throw ContractError("ProjectionConfig: det_pitch_mm must be > 0");
  if (!(step > 0.0)) throw ContractError("ProjectionConfig: step must be > 0");
}

json ProjectionConfig::to_json() const {
  return json{{"sod_mm", sod_mm}, {"sdd_mm", sdd_mm}, {"det_px", det_px},
              {"det_pitch_mm", det_pitch_mm}, {"step", step}};
}

ProjectionConfig ProjectionConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("projection config must be an object");
  ProjectionConfig c;
  std::string unknown;
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "sod_mm") c.sod_mm = v.get<double>();
      else if (k == "sdd_mm") c.sdd_mm = v.get<double>();
      else if (k == "det_px") c.det_px = v.get<int64_t>();
      else if (k == "det_pitch_mm") c.det_pitch_mm = v.get<double>();
      else if (k == "step") c.step = v.get<double>();
      else unknown += (unknown.empty() ? "" : ", ") + k;
    } catch (const json::exception&) {
      throw ConfigError("projection config: bad value for " + k);
    }
  }
  if (!unknown.empty()) throw ConfigError("projection config: unknown keys: " + unknown);
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Mat3 rotation_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c, 0, s, 0, 1, 0, -s, 0, c};
}

Mat3 rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {1, 0, 0, 0, c, -s, 0, s, c};
}

Mat3 matmul3(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
      r[i * 3 + j] = s;
    }
  return r;
}

Mat3 transpose3(const Mat3& a) {
  return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]};
}

Vec3 apply3(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

double det3(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

std::vector<double> CameraPose::flatten() const {
  std::vector<double> out(extrinsic.begin(), extrinsic.end());
  out.insert(out.end(), intrinsic.begin(), intrinsic.end());
  return out;
}

namespace {

void recover_angles(CameraPose& p) {
  // camera_to_world = R_y(h) R_x(v): row 1 is (0, cos v, -sin v), column 0's
  // first and last entries are (cos h, -sin h).
  const Mat3 c2w = p.camera_to_world();
  const double rad = 180.0 / std::numbers::pi;
  p.vert_deg = std::atan2(-c2w[5], c2w[4]) * rad;
  p.horiz_deg = std::atan2(-c2w[6], c2w[0]) * rad;
}

}  // namespace

CameraPose CameraPose::unflatten(const std::vector<double>& flat) {
  if (flat.size() != static_cast<size_t>(kFlatSize))
    throw ContractError("CameraPose::unflatten: expected 25 values, got " + std::to_string(flat.size()));
  CameraPose p;
  std::copy(flat.begin(), flat.begin() + 16, p.extrinsic.begin());
  std::copy(flat.begin() + 16, flat.end(), p.intrinsic.begin());
  recover_angles(p);
  return p;
}

Mat3 CameraPose::rotation() const {
  return {extrinsic[0], extrinsic[1], extrinsic[2], extrinsic[4], extrinsic[5],
          extrinsic[6], extrinsic[8], extrinsic[9], extrinsic[10]};
}

Mat3 CameraPose::camera_to_world() const { return transpose3(rotation()); }

Vec3 CameraPose::translation() const { return {extrinsic[3], extrinsic[7], extrinsic[11]}; }

Vec3 CameraPose::source_position() const {
  const Vec3 t = translation();
  const Vec3 c = apply3(camera_to_world(), t);
  return {-c[0], -c[1], -c[2]};
}

json CameraPose::to_json() const {
  return json{{"horiz_deg", horiz_deg},
              {"vert_deg", vert_deg},
              {"extrinsic", std::vector<double>(extrinsic.begin(), extrinsic.end())},
              {"intrinsic", std::vector<double>(intrinsic.begin(), intrinsic.end())}};
}

CameraPose CameraPose::from_json(const json& j) {
  try {
    const auto e = j.at("extrinsic").get<std::vector<double>>();
    const auto k = j.at("intrinsic").get<std::vector<double>>();
    if (e.size() != 16 || k.size() != 9) throw FormatError("pose JSON: need 16 extrinsic and 9 intrinsic values");
    CameraPose p;
    std::copy(e.begin(), e.end(), p.extrinsic.begin());
    std::copy(k.begin(), k.end(), p.intrinsic.begin());
    p.horiz_deg = j.value("horiz_deg", 0.0);
    p.vert_deg = j.value("vert_deg", 0.0);
    return p;
  } catch (const json::exception& ex) {
    throw FormatError(std::string("pose JSON: ") + ex.what());
  }
}

CameraPose pose_from_angles(double horiz_deg, double vert_deg, const ProjectionConfig& config) {
  config.validate();
  if (!std::isfinite(horiz_deg) || !std::isfinite(vert_deg))
    throw ContractError("pose_from_angles: angles must be finite");
  const double deg = std::numbers::pi / 180.0;
  const Mat3 c2w = matmul3(rotation_y(horiz_deg * deg), rotation_x(vert_deg * deg));
  const Mat3 r = transpose3(c2w);
  CameraPose p;
  p.horiz_deg = horiz_deg;
  p.vert_deg = vert_deg;
  // X_cam = R X_world + (0, 0, SOD): the volume centre sits SOD in front.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) p.extrinsic[static_cast<size_t>(i * 4 + j)] = r[static_cast<size_t>(i * 3 + j)];
  p.extrinsic[3] = 0.0;
  p.extrinsic[7] = 0.0;
  p.extrinsic[11] = config.sod_mm;
  p.extrinsic[15] = 1.0;
  const double f = config.focal_px();
  const double c = (static_cast<double>(config.det_px) - 1.0) / 2.0;
  p.intrinsic = {f, 0.0, c, 0.0, f, c, 0.0, 0.0, 1.0};
  return p;
}

std::array<double, 2> project_point(const CameraPose& pose, const Vec3& world) {
  const Vec3 rc = apply3(pose.rotation(), world);
  const Vec3 t = pose.translation();
  const Vec3 cam{rc[0] + t[0], rc[1] + t[1], rc[2] + t[2]};
  if (!(cam[2] > 0.0)) throw ContractError("project_point: point behind the source");
  const auto& k = pose.intrinsic;
  return {k[0] * cam[0] / cam[2] + k[1] * cam[1] / cam[2] + k[2], k[4] * cam[1] / cam[2] + k[5]};
}

}  // namespace xrs::geom
