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


#include "xraysynth/volume/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace xrs::vol {

void PhantomSpec::validate() const {
  if (size < 8) throw ContractError("PhantomSpec: size must be >= 8");
  if (!(spacing_mm > 0.0)) throw ContractError("PhantomSpec: spacing must be > 0");
  if (bone_bodies < 1) throw ContractError("PhantomSpec: need at least one bone body");
  if (mu_bone[0] > mu_bone[1] || mu_soft[0] > mu_soft[1])
    throw ContractError("PhantomSpec: inverted attenuation range");
  if (mu_air != 0.0) throw ContractError("PhantomSpec: air attenuation must be 0");
  if (!(mu_soft[0] > mu_air) || !(mu_bone[0] > mu_soft[1]))
    throw ContractError("PhantomSpec: require mu_bone > mu_soft > mu_air = 0");
}

namespace {

struct Ellipsoid {
  std::array<double, 3> center;  // voxel coordinates (axis 0, 1, 2)
  std::array<double, 3> radii;
  double mu;
};

bool inside(const Ellipsoid& e, double i, double j, double k) {
  const double a = (i - e.center[0]) / e.radii[0];
  const double b = (j - e.center[1]) / e.radii[1];
  const double c = (k - e.center[2]) / e.radii[2];
  return a * a + b * b + c * c <= 1.0;
}

}  // namespace

PhantomSample generate_phantom_with_mask(const PhantomSpec& spec, uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x5eedULL);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double n = static_cast<double>(spec.size);
  const double mid = (n - 1.0) / 2.0;

  Ellipsoid soft{{mid + uni(-0.03, 0.03) * n, mid + uni(-0.04, 0.04) * n, mid + uni(-0.04, 0.04) * n},
                 {uni(0.40, 0.46) * n, uni(0.30, 0.42) * n, uni(0.24, 0.34) * n},
                 uni(spec.mu_soft[0], spec.mu_soft[1])};

  // Vertical chain along axis 0, set slightly posterior (towards +depth).
  std::vector<Ellipsoid> bones;
  const int chain = std::max(1, spec.bone_bodies - spec.bone_bodies / 3);
  const double chain_x = mid + uni(-0.06, 0.06) * n;
  const double chain_z = mid + uni(0.02, 0.12) * n;
  const double span = uni(0.55, 0.70) * n;
  for (int b = 0; b < chain; ++b) {
    const double t = chain == 1 ? 0.5 : static_cast<double>(b) / (chain - 1);
    Ellipsoid e;
    e.radii = {uni(0.035, 0.06) * n, uni(0.06, 0.10) * n, uni(0.05, 0.08) * n};
    e.center = {mid - span / 2 + t * span, chain_x + uni(-0.02, 0.02) * n + 0.05 * n * std::sin(3.0 * t + uni(0.0, 3.14)),
                chain_z + uni(-0.02, 0.02) * n};
    e.mu = uni(spec.mu_bone[0], spec.mu_bone[1]);
    bones.push_back(e);
  }
  // Remaining bodies scattered off-axis (ribs, pelvis fragments, ...).
  for (int b = chain; b < spec.bone_bodies; ++b) {
    Ellipsoid e;
    e.radii = {uni(0.03, 0.07) * n, uni(0.04, 0.12) * n, uni(0.03, 0.07) * n};
    e.center = {mid + uni(-0.25, 0.25) * n, mid + uni(-0.22, 0.22) * n, mid + uni(-0.15, 0.15) * n};
    e.mu = uni(spec.mu_bone[0], spec.mu_bone[1]);
    bones.push_back(e);
  }
  // Every body must lie fully inside the grid.
  for (auto& e : bones)
    for (size_t a = 0; a < 3; ++a) e.center[a] = std::clamp(e.center[a], e.radii[a] + 0.5, n - 1.5 - e.radii[a]);

  PhantomSample out{Volume({spec.size, spec.size, spec.size}, {spec.spacing_mm, spec.spacing_mm, spec.spacing_mm}),
                    std::vector<uint8_t>(static_cast<size_t>(spec.size * spec.size * spec.size), 0)};
  for (int64_t i = 0; i < spec.size; ++i)
    for (int64_t j = 0; j < spec.size; ++j)
      for (int64_t k = 0; k < spec.size; ++k) {
        const auto di = static_cast<double>(i), dj = static_cast<double>(j), dk = static_cast<double>(k);
        double mu = inside(soft, di, dj, dk) ? soft.mu : spec.mu_air;
        bool bone = false;
        for (const auto& e : bones)
          if (inside(e, di, dj, dk)) {
            mu = bone ? std::max(mu, e.mu) : e.mu;
            bone = true;
          }
        const int64_t idx = out.volume.index(i, j, k);
        out.volume.voxels[static_cast<size_t>(idx)] = static_cast<float>(mu);
        out.bone_mask[static_cast<size_t>(idx)] = bone ? 1 : 0;
      }
  return out;
}

Volume generate_phantom(const PhantomSpec& spec, uint64_t seed) {
  return generate_phantom_with_mask(spec, seed).volume;
}

}  // namespace xrs::vol
