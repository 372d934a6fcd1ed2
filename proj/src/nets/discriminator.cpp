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


#include "xraysynth/nets/discriminator.hpp"

#include "xraysynth/geometry/pose.hpp"

namespace xrs::nets {

template <class T>
void build_discriminator(ParamStore<T>& s, const ModelConfig& c) {
  int64_t in = 1, side = c.image_size;
  for (size_t i = 0; i < c.disc_channels.size(); ++i) {
    make_conv2d(s, "d.conv" + std::to_string(i + 1), in, c.disc_channels[i], 3, true);
    in = c.disc_channels[i];
    side = (side + 1) / 2;
  }
  make_affine(s, "d.pose", geom::CameraPose::kFlatSize, c.d_p);
  make_affine(s, "d.out", in * side * side + c.d_p, 1, 1.0);
}

template <class T>
Var<T> discriminate(const ParamStore<T>& s, const ModelConfig& c, const Var<T>& img, const Var<T>& pose) {
  if (img.value().rank() != 4 || img.shape()[1] != 1 || img.shape()[2] != c.image_size ||
      img.shape()[3] != c.image_size)
    throw ContractError("discriminate: image shape " + ad::to_string(img.shape()));
  const int64_t b = img.shape()[0];
  if (pose.value().rank() != 2 || pose.shape()[0] != b || pose.shape()[1] != geom::CameraPose::kFlatSize)
    throw ContractError("discriminate: pose shape " + ad::to_string(pose.shape()));
  Var<T> h = img;
  for (size_t i = 0; i < c.disc_channels.size(); ++i) h = leaky(conv2d_apply(s, "d.conv" + std::to_string(i + 1), h, 2, 1));
  auto feat = ad::reshape(h, Shape{b, h.size() / b});
  auto pe = leaky(affine_apply(s, "d.pose", pose));
  return affine_apply(s, "d.out", ad::concat<T>({feat, pe}, 1));
}

template void build_discriminator(ParamStore<float>&, const ModelConfig&);
template void build_discriminator(ParamStore<double>&, const ModelConfig&);
template Var<float> discriminate(const ParamStore<float>&, const ModelConfig&, const Var<float>&, const Var<float>&);
template Var<double> discriminate(const ParamStore<double>&, const ModelConfig&, const Var<double>&,
                                  const Var<double>&);

}  // namespace xrs::nets
