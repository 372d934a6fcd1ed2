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


#include "xraysynth/nets/encoders.hpp"

#include <algorithm>

namespace xrs::nets {

const char* domain_prefix(Domain d) { return d == Domain::kXray ? "e_sty.s_x" : "e_sty.s_drr"; }

Domain parse_domain(const std::string& name) {
  if (name == "xray" || name == "x") return Domain::kXray;
  if (name == "drr") return Domain::kDrr;
  throw ContractError("unknown style domain '" + name + "' (expected xray or drr)");
}

namespace {

std::string ct_block(int b, int i) { return "e_ct.b" + std::to_string(b) + ".conv" + std::to_string(i); }
std::string ct_bn(int b, int i) { return "e_ct.b" + std::to_string(b) + ".bn" + std::to_string(i); }

int64_t ct_latent_side(const ModelConfig& c) { return c.volume_size / 8; }

template <class T>
void build_conv_trunk(ParamStore<T>& s, const ModelConfig& c, const std::string& prefix) {
  int64_t in = 1;
  for (int i = 0; i < 6; ++i) {
    make_conv2d(s, prefix + ".conv" + std::to_string(i + 1), in, c.sty_channels[static_cast<size_t>(i)], 3, true);
    in = c.sty_channels[static_cast<size_t>(i)];
  }
}

template <class T>
Var<T> conv_trunk(const ParamStore<T>& s, const std::string& prefix, const Var<T>& img) {
  Var<T> h = img;
  for (int i = 0; i < 6; ++i) h = leaky(conv2d_apply(s, prefix + ".conv" + std::to_string(i + 1), h, kStyleStrides[i], 1));
  return h;
}

}  // namespace

template <class T>
void build_ct_encoder(ParamStore<T>& s, const ModelConfig& c) {
  int64_t in = 1;
  for (int b = 0; b < 5; ++b) {
    const int64_t out = c.ct_channels[static_cast<size_t>(b)];
    for (int i = 1; i <= 2; ++i) {
      make_conv3d(s, ct_block(b, i), i == 1 ? in : out, out, 3, false);
      make_batch_norm(s, ct_bn(b, i), out);
    }
    in = out;
  }
  const int64_t side = ct_latent_side(c);
  make_affine(s, "e_ct.fc", c.ct_channels[4] * side * side * side, c.d_c, 1.0);
}

template <class T>
Var<T> encode_ct(ParamStore<T>& s, const ModelConfig& c, const Var<T>& vol, Mode mode, std::vector<Shape>* trace) {
  const auto& sh = vol.shape();
  if (sh.size() != 5 || sh[1] != 1 || sh[2] != c.volume_size || sh[3] != c.volume_size || sh[4] != c.volume_size)
    throw ContractError("encode_ct: expected [B, 1, " + std::to_string(c.volume_size) + "^3], got " +
                        ad::to_string(sh));
  Var<T> h = vol;
  for (int b = 0; b < 5; ++b) {
    for (int i = 1; i <= 2; ++i) {
      const int stride = (i == 1 && b >= 1 && b <= 3) ? 2 : 1;
      h = leaky(batch_norm_apply(s, ct_bn(b, i), conv3d_apply(s, ct_block(b, i), h, stride, 1), mode));
    }
    if (trace) trace->push_back(h.shape());
  }
  return affine_apply(s, "e_ct.fc", ad::reshape(h, Shape{sh[0], h.size() / sh[0]}));
}

template <class T>
void build_style_branch(ParamStore<T>& s, const ModelConfig& c, Domain d) {
  const std::string p = domain_prefix(d);
  build_conv_trunk(s, c, p);
  make_conv2d(s, p + ".out", c.sty_channels[5], c.d_s, 1, true, 1.0);
}

template <class T>
Var<T> style_branch(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& img, Domain d) {
  if (img.value().rank() != 4 || img.shape()[1] != 1 || img.shape()[2] != c.image_size || img.shape()[3] != c.image_size)
    throw ContractError("style_branch: expected [B, 1, " + std::to_string(c.image_size) + ", " +
                        std::to_string(c.image_size) + "], got " + ad::to_string(img.shape()));
  const std::string p = domain_prefix(d);
  auto h = ad::adaptive_avg_pool2d(conv_trunk(s, p, img), 1, 1);
  h = ad::tanh(conv2d_apply(s, p + ".out", h, 1, 0));
  return ad::reshape(h, Shape{img.shape()[0], c.d_s});
}

template <class T>
void build_content_branch(ParamStore<T>& s, const ModelConfig& c) {
  build_conv_trunk(s, c, "e_sty.c");
  const int64_t ch = c.sty_channels[5];
  make_conv2d(s, "e_sty.c.conv7", ch, ch, 1, true);
  const int64_t side = std::min<int64_t>(2, c.image_size / 16);
  make_affine(s, "e_sty.c.fc", ch * side * side, c.d_c, 1.0);
}

template <class T>
Var<T> content_branch(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& img) {
  if (img.value().rank() != 4 || img.shape()[2] != c.image_size || img.shape()[3] != c.image_size)
    throw ContractError("content_branch: image shape " + ad::to_string(img.shape()));
  auto h = conv_trunk(s, "e_sty.c", img);
  const int64_t side = std::min<int64_t>(2, h.shape()[2]);
  h = leaky(conv2d_apply(s, "e_sty.c.conv7", ad::adaptive_avg_pool2d(h, side, side), 1, 0));
  return affine_apply(s, "e_sty.c.fc", ad::reshape(h, Shape{img.shape()[0], h.size() / img.shape()[0]}));
}

#define XRS_INSTANTIATE_ENCODERS(T)                                                                    \
  template void build_ct_encoder(ParamStore<T>&, const ModelConfig&);                                 \
  template Var<T> encode_ct(ParamStore<T>&, const ModelConfig&, const Var<T>&, Mode, std::vector<Shape>*); \
  template void build_style_branch(ParamStore<T>&, const ModelConfig&, Domain);                       \
  template Var<T> style_branch(const ParamStore<T>&, const ModelConfig&, const Var<T>&, Domain);      \
  template void build_content_branch(ParamStore<T>&, const ModelConfig&);                             \
  template Var<T> content_branch(const ParamStore<T>&, const ModelConfig&, const Var<T>&);

XRS_INSTANTIATE_ENCODERS(float)
XRS_INSTANTIATE_ENCODERS(double)

}  // namespace xrs::nets
