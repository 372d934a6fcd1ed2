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


#include "xraysynth/nets/layers.hpp"

#include <cmath>

namespace xrs::nets {

using ad::InitSpec;

template <class T>
void make_conv2d(ParamStore<T>& s, const std::string& name, int64_t in, int64_t out, int64_t k, bool bias,
                 double gain_slope) {
  s.create(name + ".w", Shape{out, in, k, k}, InitSpec::he(in * k * k, gain_slope));
  if (bias) s.create(name + ".b", Shape{out}, InitSpec::zeros());
}

template <class T>
Var<T> conv2d_apply(const ParamStore<T>& s, const std::string& name, const Var<T>& x, int stride, int pad) {
  auto y = ad::conv2d(x, s.get(name + ".w"), stride, pad);
  if (s.contains(name + ".b")) y = ad::add_channel_bias(y, s.get(name + ".b"));
  return y;
}

template <class T>
void make_conv3d(ParamStore<T>& s, const std::string& name, int64_t in, int64_t out, int64_t k, bool bias) {
  s.create(name + ".w", Shape{out, in, k, k, k}, InitSpec::he(in * k * k * k));
  if (bias) s.create(name + ".b", Shape{out}, InitSpec::zeros());
}

template <class T>
Var<T> conv3d_apply(const ParamStore<T>& s, const std::string& name, const Var<T>& x, int stride, int pad) {
  ad::ConvGeometry g;
  g.stride = {stride, stride, stride};
  g.pad = {pad, pad, pad};
  auto y = ad::conv3d(x, s.get(name + ".w"), g);
  if (s.contains(name + ".b")) y = ad::add_channel_bias(y, s.get(name + ".b"));
  return y;
}

template <class T>
void make_affine(ParamStore<T>& s, const std::string& name, int64_t in, int64_t out, double gain_slope,
                 double bias_init) {
  s.create(name + ".w", Shape{in, out}, InitSpec::he(in, gain_slope));
  s.create(name + ".b", Shape{out}, bias_init == 0.0 ? InitSpec::zeros() : InitSpec::constant(bias_init));
}

template <class T>
Var<T> affine_apply(const ParamStore<T>& s, const std::string& name, const Var<T>& x) {
  return ad::affine(x, s.get(name + ".w"), s.get(name + ".b"));
}

template <class T>
void make_batch_norm(ParamStore<T>& s, const std::string& name, int64_t channels) {
  s.create(name + ".gamma", Shape{channels}, InitSpec::constant(1.0));
  s.create(name + ".beta", Shape{channels}, InitSpec::zeros());
  s.create(name + ".running_mean", Shape{channels}, InitSpec::zeros(), false);
  s.create(name + ".running_var", Shape{channels}, InitSpec::constant(1.0), false);
}

template <class T>
Var<T> batch_norm_apply(ParamStore<T>& s, const std::string& name, const Var<T>& x, Mode mode, double momentum,
                        double eps) {
  const int64_t n = x.shape()[0], c = x.shape()[1];
  const Shape& shape = x.shape();
  auto per_channel = [&](const Var<T>& nc) { return ad::expand_channels(ad::broadcast_axis(nc, 0, n), shape); };
  Var<T> mean_c, var_c, centered;
  if (mode == Mode::kTrain) {
    mean_c = ad::reduce_mean(ad::channel_mean(x), 0);
    centered = ad::sub(x, per_channel(mean_c));
    var_c = ad::reduce_mean(ad::channel_mean(ad::square(centered)), 0);
    Tensor<T> rm = s.get(name + ".running_mean").value();
    Tensor<T> rv = s.get(name + ".running_var").value();
    for (int64_t i = 0; i < c; ++i) {
      rm[i] = static_cast<T>(momentum * rm[i] + (1.0 - momentum) * mean_c.value()[i]);
      rv[i] = static_cast<T>(momentum * rv[i] + (1.0 - momentum) * var_c.value()[i]);
    }
    s.set_value(name + ".running_mean", rm);
    s.set_value(name + ".running_var", rv);
  } else {
    mean_c = s.get(name + ".running_mean").detach();
    var_c = s.get(name + ".running_var").detach();
    centered = ad::sub(x, per_channel(mean_c));
  }
  auto sd = ad::sqrt(ad::add_scalar(var_c, static_cast<T>(eps)));
  auto xhat = ad::div(centered, per_channel(sd));
  return ad::add(ad::mul(xhat, per_channel(s.get(name + ".gamma"))), per_channel(s.get(name + ".beta")));
}

template <class T>
Var<T> adain(const Var<T>& x, const Var<T>& scale, const Var<T>& shift, double eps) {
  const Shape& shape = x.shape();
  auto m = ad::channel_mean(x);
  auto centered = ad::sub(x, ad::expand_channels(m, shape));
  auto sd = ad::sqrt(ad::add_scalar(ad::channel_mean(ad::square(centered)), static_cast<T>(eps)));
  auto xhat = ad::div(centered, ad::expand_channels(sd, shape));
  return ad::add(ad::mul(xhat, ad::expand_channels(scale, shape)), ad::expand_channels(shift, shape));
}

template <class T>
Var<T> standardize_rows(const Var<T>& x, double eps) {
  const int64_t f = x.shape()[1];
  auto m = ad::reduce_mean(x, 1);
  auto centered = ad::sub(x, ad::broadcast_axis(m, 1, f));
  auto sd = ad::sqrt(ad::add_scalar(ad::reduce_mean(ad::square(centered), 1), static_cast<T>(eps)));
  return ad::div(centered, ad::broadcast_axis(sd, 1, f));
}

#define XRS_INSTANTIATE_LAYERS(T)                                                                          \
  template void make_conv2d(ParamStore<T>&, const std::string&, int64_t, int64_t, int64_t, bool, double);  \
  template Var<T> conv2d_apply(const ParamStore<T>&, const std::string&, const Var<T>&, int, int);         \
  template void make_conv3d(ParamStore<T>&, const std::string&, int64_t, int64_t, int64_t, bool);          \
  template Var<T> conv3d_apply(const ParamStore<T>&, const std::string&, const Var<T>&, int, int);         \
  template void make_affine(ParamStore<T>&, const std::string&, int64_t, int64_t, double, double);         \
  template Var<T> affine_apply(const ParamStore<T>&, const std::string&, const Var<T>&);                   \
  template void make_batch_norm(ParamStore<T>&, const std::string&, int64_t);                              \
  template Var<T> batch_norm_apply(ParamStore<T>&, const std::string&, const Var<T>&, Mode, double, double); \
  template Var<T> adain(const Var<T>&, const Var<T>&, const Var<T>&, double);                              \
  template Var<T> standardize_rows(const Var<T>&, double);

XRS_INSTANTIATE_LAYERS(float)
XRS_INSTANTIATE_LAYERS(double)

}  // namespace xrs::nets
