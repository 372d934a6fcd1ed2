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

#include "xraysynth/nets/layers.hpp"
#include "xraysynth/nets/model_config.hpp"

namespace xrs::nets {

/// Style-based synthesis network under g.*: a learned 4x4 constant followed
/// by L layers of (nearest upsample when the schedule doubles, 3x3 conv,
/// AdaIN, leaky). Layers 1..k_c take AdaIN parameters from the content code,
/// the rest from the style code. A 1x1 convolution and sigmoid give a
/// single-channel image in [0,1].
template <class T>
void build_generator(ParamStore<T>& s, const ModelConfig& c);

/// f_c: [B, d_c], f_sty: [B, d_s] -> [B, 1, S, S]. `trace` receives the
/// activation of every synthesis layer.
template <class T>
Var<T> generate(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& f_c, const Var<T>& f_sty,
                std::vector<Var<T>>* trace = nullptr);

}  // namespace xrs::nets
