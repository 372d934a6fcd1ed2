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


#include "xraysynth/train/adam.hpp"

#include <cmath>

namespace xrs::train {

Adam::Adam(ad::ParamStore<float>& store, std::vector<std::string> names, Options options)
    : store_(store), names_(std::move(names)), opt_(options) {
  for (const auto& n : names_) {
    const auto& shape = store_.get(n).shape();
    if (!store_.contains("opt.m." + n)) store_.create("opt.m." + n, shape, ad::InitSpec::zeros(), false);
    if (!store_.contains("opt.v." + n)) store_.create("opt.v." + n, shape, ad::InitSpec::zeros(), false);
  }
}

void Adam::step(const std::vector<ad::Var<float>>& grads, int64_t t) {
  if (grads.size() != names_.size()) throw ContractError("Adam::step: gradient count mismatch");
  if (t < 1) throw ContractError("Adam::step: t must be >= 1");
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t));
  for (size_t i = 0; i < names_.size(); ++i) {
    const auto& n = names_[i];
    auto p = store_.get(n);
    auto m = store_.get("opt.m." + n);
    auto v = store_.get("opt.v." + n);
    const auto& g = grads[i].value();
    if (g.shape() != p.shape()) throw ContractError("Adam::step: gradient shape mismatch for " + n);
    auto& pv = p.mutable_value();
    auto& mv = m.mutable_value();
    auto& vv = v.mutable_value();
    for (int64_t k = 0; k < pv.size(); ++k) {
      const double gk = g[k];
      const double mk = opt_.beta1 * mv[k] + (1.0 - opt_.beta1) * gk;
      const double vk = opt_.beta2 * vv[k] + (1.0 - opt_.beta2) * gk * gk;
      mv[k] = static_cast<float>(mk);
      vv[k] = static_cast<float>(vk);
      pv[k] = static_cast<float>(pv[k] - opt_.lr * (mk / bc1) / (std::sqrt(vk / bc2) + opt_.eps));
    }
  }
}

}  // namespace xrs::train
