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

#include <vector>

#include "xraysynth/geometry/pose.hpp"
#include "xraysynth/nets/layers.hpp"
#include "xraysynth/nets/model_config.hpp"
#include "xraysynth/volume/volume.hpp"

namespace xrs::nets {

/// The 25-vector fed to pose embeddings: the flattened pose with the
/// translation divided by SOD and the intrinsic matrix divided by the focal
/// length, so every entry is O(1).
std::vector<double> pose_features(const geom::CameraPose& pose);

/// MIP of the volume after rotation into the pose's camera frame, flattened
/// row-major (H * W values).
std::vector<double> projection_features(const vol::Volume& normalized_volume, const geom::CameraPose& pose);

/// Multi-head scaled attention on per-sample codes. q, k, v: [B, width],
/// viewed as [B, heads, width / heads]. Returns the [B, width] output and
/// the [B, heads, heads] attention map.
template <class T>
struct AttentionResult {
  Var<T> output;
  Var<T> weights;
};

template <class T>
AttentionResult<T> head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int64_t heads, double tau);

/// Mean Shannon entropy (nats) of the attention rows softmax(q k^T / tau).
double attention_entropy(const Tensor<double>& q, const Tensor<double>& k, int64_t heads, double tau);

template <class T>
void build_pam(ParamStore<T>& s, const ModelConfig& c);

/// f_ct: [B, d_c], pose: [B, 25] from pose_features, mip: [B, S*S] from
/// projection_features. Q = merge(concat(f_ct, pose_embed(pose))),
/// K = V = project(standardize(mip)).
template <class T>
AttentionResult<T> modify_content(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& f_ct,
                                  const Var<T>& pose, const Var<T>& mip);

}  // namespace xrs::nets
