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


#include "xraysynth/nets/generator.hpp"

namespace xrs::nets {

namespace {

std::string layer_name(int64_t i) { return "g.l" + std::to_string(i); }

}  // namespace

template <class T>
void build_generator(ParamStore<T>& s, const ModelConfig& c) {
  const int64_t layers = c.synthesis_layers();
  const int64_t kc = c.content_layers();
  s.create("g.const", Shape{1, c.layer_channels(1), 4, 4}, ad::InitSpec::normal(1.0));
  int64_t in = c.layer_channels(1);
  for (int64_t i = 1; i <= layers; ++i) {
    const int64_t out = c.layer_channels(i);
    make_conv2d(s, layer_name(i) + ".conv", in, out, 3, false);
    // Scale is 1 + affine(code), so a zero-initialised modulator bias gives
    // identity scaling at the start.
    make_affine(s, layer_name(i) + ".mod", i <= kc ? c.d_c : c.d_s, 2 * out, 1.0);
    in = out;
  }
  make_conv2d(s, "g.out", in, 1, 1, true, 1.0);
}

template <class T>
Var<T> generate(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& f_c, const Var<T>& f_sty,
                std::vector<Var<T>>* trace) {
  if (f_c.value().rank() != 2 || f_c.shape()[1] != c.d_c)
    throw ContractError("generate: content code must be [B, " + std::to_string(c.d_c) + "], got " +
                        ad::to_string(f_c.shape()));
  if (f_sty.value().rank() != 2 || f_sty.shape()[1] != c.d_s || f_sty.shape()[0] != f_c.shape()[0])
    throw ContractError("generate: style code must be [B, " + std::to_string(c.d_s) + "], got " +
                        ad::to_string(f_sty.shape()));
  const int64_t b = f_c.shape()[0];
  const int64_t layers = c.synthesis_layers();
  const int64_t kc = c.content_layers();
  // The learned constant repeated over the batch.
  Var<T> h = ad::broadcast_axis(ad::reshape(s.get("g.const"), Shape{c.layer_channels(1), 4, 4}), 0, b);
  int64_t res = 4;
  for (int64_t i = 1; i <= layers; ++i) {
    const int64_t target = c.layer_resolution(i);
    if (target != res) {
      h = ad::upsample_nearest2d(h, static_cast<int>(target / res));
      res = target;
    }
    h = conv2d_apply(s, layer_name(i) + ".conv", h, 1, 1);
    const int64_t ch = c.layer_channels(i);
    auto mod = affine_apply(s, layer_name(i) + ".mod", i <= kc ? f_c : f_sty);
    auto scale = ad::add_scalar(ad::slice(mod, 1, 0, ch), T(1));
    auto shift = ad::slice(mod, 1, ch, ch);
    h = leaky(adain(h, scale, shift));
    if (trace) trace->push_back(h);
  }
  return ad::sigmoid(conv2d_apply(s, "g.out", h, 1, 0));
}

#define XRS_INSTANTIATE_GEN(T)                                  \
  template void build_generator(ParamStore<T>&, const ModelConfig&); \
  template Var<T> generate(const ParamStore<T>&, const ModelConfig&, const Var<T>&, const Var<T>&, std::vector<Var<T>>*);

XRS_INSTANTIATE_GEN(float)
XRS_INSTANTIATE_GEN(double)

}  // namespace xrs::nets
