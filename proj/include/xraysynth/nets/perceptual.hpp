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

#include "xraysynth/nets/layers.hpp"

namespace xrs::nets {

/// Frozen random-weight convolution pyramid used as the perceptual feature
/// space (for the reconstruction loss and for FID/KID). Four stages of
/// 3x3 convolution + leaky activation; stages 2-4 downsample by two.
/// Weights depend only on the extractor seed and are never trained or
/// checkpointed.
template <class T>
class PerceptualExtractor {
 public:
  static constexpr std::array<int64_t, 4> kChannels{8, 16, 16, 32};
  static constexpr uint64_t kDefaultSeed = 1234;

  explicit PerceptualExtractor(uint64_t seed = kDefaultSeed);

  uint64_t seed() const { return store_.seed(); }
  const ParamStore<T>& store() const { return store_; }

  /// img: [B, 1, H, W] in [0,1]; returns the four stage activations.
  std::vector<Var<T>> stages(const Var<T>& img) const;

  /// Per-stage channel unit-normalisation, mean squared difference, summed
  /// over stages. The mean runs over batch, channels and pixels, so a batch
  /// gives the average per-image distance.
  Var<T> distance(const Var<T>& a, const Var<T>& b) const;

  /// Global-average-pooled final stage, one row per image: [B, 32].
  Tensor<double> embed(const Var<T>& img) const;

 private:
  ParamStore<T> store_;
};

/// Convenience: perceptual distance between two single images.
double perceptual_distance(const PerceptualExtractor<double>& net, const std::vector<float>& a,
                           const std::vector<float>& b, int64_t height, int64_t width);

}  // namespace xrs::nets
