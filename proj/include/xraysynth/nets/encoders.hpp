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

enum class Domain { kXray, kDrr };

const char* domain_prefix(Domain d);  // "e_sty.s_x" / "e_sty.s_drr"
Domain parse_domain(const std::string& name);  // "xray" | "drr"; ContractError otherwise

/// CT encoder under e_ct.*: five blocks of (conv3d, BN, leaky) x 2, the
/// middle three opening with a stride-2 convolution, then flatten + affine.
template <class T>
void build_ct_encoder(ParamStore<T>& s, const ModelConfig& c);

/// vol: [B, 1, S, S, S] in [0,1] -> [B, d_c]. `trace` receives the output
/// shape of every block.
template <class T>
Var<T> encode_ct(ParamStore<T>& s, const ModelConfig& c, const Var<T>& vol, Mode mode,
                 std::vector<Shape>* trace = nullptr);

/// Style branch: six 3x3 convolutions with leaky activations, adaptive
/// average pooling to 1x1, then a 1x1 convolution to d_s and tanh.
template <class T>
void build_style_branch(ParamStore<T>& s, const ModelConfig& c, Domain d);
template <class T>
Var<T> style_branch(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& img, Domain d);

/// Content branch under e_sty.c.*: the same six convolutions, pooling to 2x2,
/// a 1x1 convolution with leaky activation, flatten and affine to d_c.
template <class T>
void build_content_branch(ParamStore<T>& s, const ModelConfig& c);
template <class T>
Var<T> content_branch(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& img);

}  // namespace xrs::nets
