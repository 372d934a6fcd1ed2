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

#include <string>
#include <vector>

#include "xraysynth/autodiff/param_store.hpp"

namespace xrs::train {

/// Adam over a named subset of a ParamStore. The moment estimates live in
/// the same store as non-trainable entries "opt.m.<name>" / "opt.v.<name>",
/// so a single save captures parameters and optimiser state together.
class Adam {
 public:
  struct Options {
    double lr = 0.0025;
    double beta1 = 0.0;
    double beta2 = 0.99;
    double eps = 1e-8;
  };

  Adam(ad::ParamStore<float>& store, std::vector<std::string> names, Options options);

  /// One update with gradients aligned to the names given at construction.
  /// `t` is the 1-based update count used for bias correction.
  void step(const std::vector<ad::Var<float>>& grads, int64_t t);

  const std::vector<std::string>& names() const { return names_; }

 private:
  ad::ParamStore<float>& store_;
  std::vector<std::string> names_;
  Options opt_;
};

}  // namespace xrs::train
