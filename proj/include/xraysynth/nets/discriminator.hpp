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

#include "xraysynth/nets/layers.hpp"
#include "xraysynth/nets/model_config.hpp"

namespace xrs::nets {

/// Pose-conditioned critic under d.*: stride-2 3x3 convolutions with leaky
/// activations, flattened and concatenated with an embedding of the pose
/// vector, then one affine map to an unbounded score.
template <class T>
void build_discriminator(ParamStore<T>& s, const ModelConfig& c);

/// img: [B, 1, S, S], pose: [B, 25] -> scores [B, 1].
template <class T>
Var<T> discriminate(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& img, const Var<T>& pose);

}  // namespace xrs::nets
