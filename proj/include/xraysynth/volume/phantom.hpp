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

#include "xraysynth/volume/volume.hpp"

namespace xrs::vol {

/// Procedural CT phantom: a soft-tissue ellipsoid in air holding a vertical
/// chain of bone ellipsoids (a crude spine) plus optional off-axis bodies.
struct PhantomSpec {
  int64_t size = 64;  // cubic extent in voxels
  double spacing_mm = 1.0;
  int bone_bodies = 5;
  std::array<double, 2> mu_bone{0.040, 0.060};  // mm^-1
  std::array<double, 2> mu_soft{0.017, 0.022};
  double mu_air = 0.0;

  /// Throws ContractError on zero bodies, inverted ranges or bone <= soft.
  void validate() const;
};

struct PhantomSample {
  Volume volume;
  std::vector<uint8_t> bone_mask;  // 1 where any bone body covers the voxel
};

PhantomSample generate_phantom_with_mask(const PhantomSpec& spec, uint64_t seed);
Volume generate_phantom(const PhantomSpec& spec, uint64_t seed);

}  // namespace xrs::vol
