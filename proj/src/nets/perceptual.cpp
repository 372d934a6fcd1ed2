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


#include "xraysynth/nets/perceptual.hpp"

namespace xrs::nets {

template <class T>
PerceptualExtractor<T>::PerceptualExtractor(uint64_t seed) : store_(seed) {
  int64_t in = 1;
  for (size_t i = 0; i < kChannels.size(); ++i) {
    store_.create("perceptual.s" + std::to_string(i + 1) + ".w", Shape{kChannels[i], in, 3, 3},
                  ad::InitSpec::he(in * 9), false);
    in = kChannels[i];
  }
}

template <class T>
std::vector<Var<T>> PerceptualExtractor<T>::stages(const Var<T>& img) const {
  std::vector<Var<T>> out;
  Var<T> h = ad::add_scalar(ad::mul_scalar(img, T(2)), T(-1));
  for (size_t i = 0; i < kChannels.size(); ++i) {
    h = leaky(ad::conv2d(h, store_.get("perceptual.s" + std::to_string(i + 1) + ".w").detach(), i == 0 ? 1 : 2, 1));
    out.push_back(h);
  }
  return out;
}

namespace {

template <class T>
Var<T> unit_channels(const Var<T>& f) {
  // f / sqrt(sum_c f^2 + eps) at every pixel.
  const auto& s = f.shape();
  const int64_t n = s[0], c = s[1], hw = s[2] * s[3];
  auto flat = ad::reshape(f, Shape{n, c, hw});
  auto norm = ad::sqrt(ad::add_scalar(ad::reduce_sum(ad::square(flat), 1), static_cast<T>(1e-10)));
  return ad::reshape(ad::div(flat, ad::broadcast_axis(norm, 1, c)), s);
}

}  // namespace

template <class T>
Var<T> PerceptualExtractor<T>::distance(const Var<T>& a, const Var<T>& b) const {
  if (a.shape() != b.shape())
    throw ContractError("perceptual distance: shape mismatch " + ad::to_string(a.shape()) + " vs " +
                        ad::to_string(b.shape()));
  const auto fa = stages(a), fb = stages(b);
  Var<T> total;
  for (size_t i = 0; i < fa.size(); ++i) {
    auto d = ad::mean(ad::square(ad::sub(unit_channels(fa[i]), unit_channels(fb[i]))));
    total = total.defined() ? ad::add(total, d) : d;
  }
  return total;
}

template <class T>
Tensor<double> PerceptualExtractor<T>::embed(const Var<T>& img) const {
  ad::NoGrad ng;
  const auto last = stages(img).back();
  const int64_t n = last.shape()[0], c = last.shape()[1];
  const auto pooled = ad::channel_mean(last).value();
  Tensor<double> out(Shape{n, c});
  for (int64_t i = 0; i < n * c; ++i) out[i] = static_cast<double>(pooled[i]);
  return out;
}

template class PerceptualExtractor<float>;
template class PerceptualExtractor<double>;

double perceptual_distance(const PerceptualExtractor<double>& net, const std::vector<float>& a,
                           const std::vector<float>& b, int64_t height, int64_t width) {
  ad::NoGrad ng;
  auto to_var = [&](const std::vector<float>& v) {
    Tensor<double> t(Shape{1, 1, height, width});
    for (int64_t i = 0; i < t.size(); ++i) t[i] = v[static_cast<size_t>(i)];
    return Var<double>::constant(std::move(t));
  };
  return net.distance(to_var(a), to_var(b)).item();
}

}  // namespace xrs::nets
