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

// Parameterised building blocks shared by every network. Parameters are
// registered in a ParamStore under dotted names at construction time and
// looked up by name in the forward pass.

#include <string>

#include "xraysynth/autodiff/ops.hpp"
#include "xraysynth/autodiff/param_store.hpp"

namespace xrs::nets {

using ad::ParamStore;
using ad::Shape;
using ad::Tensor;
using ad::Var;

inline constexpr double kLeakySlope = 0.2;

enum class Mode { kTrain, kEval };

template <class T>
Var<T> leaky(const Var<T>& x) {
  return ad::leaky_relu(x, static_cast<T>(kLeakySlope));
}

/// `<name>.w` [out, in, k, k] (+ `<name>.b` [out]).
template <class T>
void make_conv2d(ParamStore<T>& s, const std::string& name, int64_t in, int64_t out, int64_t k, bool bias,
                 double gain_slope = kLeakySlope);
template <class T>
Var<T> conv2d_apply(const ParamStore<T>& s, const std::string& name, const Var<T>& x, int stride, int pad);

/// `<name>.w` [out, in, k, k, k] (+ `<name>.b`).
template <class T>
void make_conv3d(ParamStore<T>& s, const std::string& name, int64_t in, int64_t out, int64_t k, bool bias);
template <class T>
Var<T> conv3d_apply(const ParamStore<T>& s, const std::string& name, const Var<T>& x, int stride, int pad);

/// `<name>.w` [in, out], `<name>.b` [out].
template <class T>
void make_affine(ParamStore<T>& s, const std::string& name, int64_t in, int64_t out, double gain_slope = kLeakySlope,
                 double bias_init = 0.0);
template <class T>
Var<T> affine_apply(const ParamStore<T>& s, const std::string& name, const Var<T>& x);

/// `<name>.gamma`, `<name>.beta` (trainable) and `<name>.running_mean`,
/// `<name>.running_var` (buffers).
template <class T>
void make_batch_norm(ParamStore<T>& s, const std::string& name, int64_t channels);

/// Training mode normalises with per-batch statistics over (N, spatial) and
/// folds them into the running averages with momentum 0.9; evaluation mode
/// uses the running averages.
template <class T>
Var<T> batch_norm_apply(ParamStore<T>& s, const std::string& name, const Var<T>& x, Mode mode,
                        double momentum = 0.9, double eps = 1e-5);

/// Adaptive instance normalisation: each (sample, channel) of x is normalised
/// over its spatial extent and then mapped to scale * x_hat + shift.
/// x: [N, C, H, W], scale/shift: [N, C].
template <class T>
Var<T> adain(const Var<T>& x, const Var<T>& scale, const Var<T>& shift, double eps = 1e-8);

/// Per-image standardisation to zero mean and unit variance. x: [N, F].
template <class T>
Var<T> standardize_rows(const Var<T>& x, double eps = 1e-6);

}  // namespace xrs::nets
