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

// Differentiable primitives. All of them are defined for T = float and
// T = double. Every backward rule is expressed with these same primitives, so
// each one is differentiable to second order.

#include <array>
#include <vector>

#include "xraysynth/autodiff/var.hpp"

namespace xrs::ad {

// ---- elementwise -----------------------------------------------------------
template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> div(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> add_scalar(const Var<T>& x, T c);
template <class T> Var<T> mul_scalar(const Var<T>& x, T c);
template <class T> Var<T> neg(const Var<T>& x);
template <class T> Var<T> square(const Var<T>& x);
template <class T> Var<T> abs(const Var<T>& x);
/// Derivative taken as 0 where the input is exactly 0.
template <class T> Var<T> sqrt(const Var<T>& x);
template <class T> Var<T> exp(const Var<T>& x);
template <class T> Var<T> tanh(const Var<T>& x);
template <class T> Var<T> sigmoid(const Var<T>& x);
template <class T> Var<T> leaky_relu(const Var<T>& x, T slope);

// ---- reductions and broadcasting -------------------------------------------
/// Sum of all elements, shape {1}.
template <class T> Var<T> sum(const Var<T>& x);
template <class T> Var<T> mean(const Var<T>& x);
/// Shape {1} value broadcast to `shape`.
template <class T> Var<T> expand_scalar(const Var<T>& s, const Shape& shape);
/// Removes `axis` by summation. Rank-1 inputs reduce to shape {1}.
template <class T> Var<T> reduce_sum(const Var<T>& x, int axis);
template <class T> Var<T> reduce_mean(const Var<T>& x, int axis);
/// Inserts a new axis of extent `n` at position `axis` (adjoint of reduce_sum).
template <class T> Var<T> broadcast_axis(const Var<T>& x, int axis, int64_t n);

// ---- shape -----------------------------------------------------------------
template <class T> Var<T> reshape(const Var<T>& x, const Shape& shape);
/// Swaps the last two axes.
template <class T> Var<T> transpose_last2(const Var<T>& x);
template <class T> Var<T> concat(const std::vector<Var<T>>& xs, int axis);
template <class T> Var<T> slice(const Var<T>& x, int axis, int64_t start, int64_t length);
/// Zero tensor with extent `full` along `axis`, x written at `start`.
template <class T> Var<T> embed(const Var<T>& x, int axis, int64_t start, int64_t full);

// ---- linear maps -----------------------------------------------------------
/// [..., m, k] x [..., k, n] with identical leading axes.
template <class T> Var<T> matmul(const Var<T>& a, const Var<T>& b);

struct ConvGeometry {
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> pad{0, 0, 0};
};

/// x: [N, Ci, D, H, W], w: [Co, Ci, KD, KH, KW] -> [N, Co, Do, Ho, Wo].
template <class T> Var<T> conv3d(const Var<T>& x, const Var<T>& w, const ConvGeometry& geom);
/// x: [N, Ci, H, W], w: [Co, Ci, KH, KW].
template <class T> Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad);
/// Adjoints of conv3d with respect to its input and its weights.
template <class T>
Var<T> conv3d_input_grad(const Var<T>& grad_out, const Var<T>& w, const Shape& x_shape,
                         const ConvGeometry& geom);
template <class T>
Var<T> conv3d_weight_grad(const Var<T>& x, const Var<T>& grad_out, const Shape& w_shape,
                          const ConvGeometry& geom);

// ---- spatial resampling (last two axes) ------------------------------------
template <class T> Var<T> upsample_nearest2d(const Var<T>& x, int factor);
template <class T> Var<T> sum_pool2d(const Var<T>& x, int factor_h, int factor_w);
/// Output size must divide the input size.
template <class T> Var<T> adaptive_avg_pool2d(const Var<T>& x, int64_t out_h, int64_t out_w);

// ---- composites ------------------------------------------------------------
template <class T> Var<T> softmax_last(const Var<T>& x);
/// x: [B, in], w: [in, out], b: [out].
template <class T> Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& b);
/// x: [N, C, ...], b: [C].
template <class T> Var<T> add_channel_bias(const Var<T>& x, const Var<T>& b);
/// Per-(sample, channel) mean over the trailing axes: [N, C, ...] -> [N, C].
template <class T> Var<T> channel_mean(const Var<T>& x);
/// Per-(sample, channel) standard deviation sqrt(var + eps): [N, C, ...] -> [N, C].
template <class T> Var<T> channel_std(const Var<T>& x, T eps);
/// Broadcast [N, C] over the trailing axes of `shape` ([N, C, ...]).
template <class T> Var<T> expand_channels(const Var<T>& nc, const Shape& shape);

}  // namespace xrs::ad
