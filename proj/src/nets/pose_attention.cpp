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


#include "xraysynth/nets/pose_attention.hpp"

#include <algorithm>
#include <cmath>

#include "xraysynth/geometry/render.hpp"

namespace xrs::nets {

std::vector<double> pose_features(const geom::CameraPose& pose) {
  std::vector<double> f = pose.flatten();
  const double sod = pose.extrinsic[11];
  const double fx = pose.intrinsic[0];
  if (!(sod > 0.0) || !(fx > 0.0)) throw ContractError("pose_features: degenerate pose");
  for (int i : {3, 7, 11}) f[static_cast<size_t>(i)] /= sod;
  for (int i = 16; i < 25; ++i) f[static_cast<size_t>(i)] /= fx;
  return f;
}

std::vector<double> projection_features(const vol::Volume& v, const geom::CameraPose& pose) {
  const auto mip = geom::max_intensity_projection(geom::rotate_volume(v, pose));
  return std::vector<double>(mip.pixels.begin(), mip.pixels.end());
}

template <class T>
AttentionResult<T> head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int64_t heads, double tau) {
  if (q.shape() != k.shape() || q.shape() != v.shape() || q.value().rank() != 2)
    throw ContractError("head_attention: q, k, v must share a [B, width] shape; got " + ad::to_string(q.shape()) +
                        ", " + ad::to_string(k.shape()) + ", " + ad::to_string(v.shape()));
  const int64_t b = q.shape()[0], w = q.shape()[1];
  if (heads < 1 || w % heads != 0)
    throw ConfigError("head_attention: width " + std::to_string(w) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  if (!(tau > 0.0)) throw ConfigError("head_attention: tau must be > 0");
  const Shape hs{b, heads, w / heads};
  auto qh = ad::reshape(q, hs), kh = ad::reshape(k, hs), vh = ad::reshape(v, hs);
  auto logits = ad::mul_scalar(ad::matmul(qh, ad::transpose_last2(kh)), static_cast<T>(1.0 / tau));
  auto a = ad::softmax_last(logits);
  return {ad::reshape(ad::matmul(a, vh), Shape{b, w}), a};
}

double attention_entropy(const Tensor<double>& q, const Tensor<double>& k, int64_t heads, double tau) {
  ad::NoGrad ng;
  auto r = head_attention(Var<double>::constant(q), Var<double>::constant(k), Var<double>::constant(k), heads, tau);
  const auto& a = r.weights.value();
  const int64_t rows = a.size() / heads;
  double total = 0.0;
  for (int64_t i = 0; i < rows; ++i) {
    double h = 0.0;
    for (int64_t j = 0; j < heads; ++j) {
      const double p = a[i * heads + j];
      if (p > 0.0) h -= p * std::log(p);
    }
    total += h;
  }
  return total / static_cast<double>(rows);
}

template <class T>
void build_pam(ParamStore<T>& s, const ModelConfig& c) {
  make_affine(s, "pam.pose.fc1", geom::CameraPose::kFlatSize, c.d_p);
  make_affine(s, "pam.pose.fc2", c.d_p, c.d_p, 1.0);
  make_affine(s, "pam.merge.fc1", c.d_c + c.d_p, c.pam_hidden);
  make_affine(s, "pam.merge.fc2", c.pam_hidden, c.d_c, 1.0);
  make_affine(s, "pam.proj.fc1", c.volume_size * c.volume_size, c.pam_hidden);
  make_affine(s, "pam.proj.fc2", c.pam_hidden, c.d_c, 1.0);
}

template <class T>
AttentionResult<T> modify_content(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& f_ct,
                                  const Var<T>& pose, const Var<T>& mip) {
  if (f_ct.value().rank() != 2 || f_ct.shape()[1] != c.d_c)
    throw ContractError("modify_content: content code shape " + ad::to_string(f_ct.shape()));
  if (pose.value().rank() != 2 || pose.shape()[1] != geom::CameraPose::kFlatSize)
    throw ContractError("modify_content: pose shape " + ad::to_string(pose.shape()));
  if (mip.value().rank() != 2 || mip.shape()[1] != c.volume_size * c.volume_size)
    throw ContractError("modify_content: projection shape " + ad::to_string(mip.shape()));
  auto pe = affine_apply(s, "pam.pose.fc2", leaky(affine_apply(s, "pam.pose.fc1", pose)));
  auto q = affine_apply(s, "pam.merge.fc2", leaky(affine_apply(s, "pam.merge.fc1", ad::concat<T>({f_ct, pe}, 1))));
  auto kv = affine_apply(s, "pam.proj.fc2", leaky(affine_apply(s, "pam.proj.fc1", standardize_rows(mip))));
  return head_attention(q, kv, kv, c.heads, c.temperature());
}

#define XRS_INSTANTIATE_PAM(T)                                                                        \
  template AttentionResult<T> head_attention(const Var<T>&, const Var<T>&, const Var<T>&, int64_t, double); \
  template void build_pam(ParamStore<T>&, const ModelConfig&);                                       \
  template AttentionResult<T> modify_content(const ParamStore<T>&, const ModelConfig&, const Var<T>&, \
                                             const Var<T>&, const Var<T>&);

XRS_INSTANTIATE_PAM(float)
XRS_INSTANTIATE_PAM(double)

}  // namespace xrs::nets
