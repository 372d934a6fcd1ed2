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

#include <cstdint>

#include "xraysynth/nets/discriminator.hpp"
#include "xraysynth/nets/encoders.hpp"
#include "xraysynth/nets/generator.hpp"
#include "xraysynth/nets/pose_attention.hpp"

namespace xrs::nets {

/// Every trainable network in one ParamStore: e_ct.*, e_sty.{s_x,s_drr,c}.*,
/// pam.*, g.*, d.*.
template <class T>
class Model {
 public:
  Model(const ModelConfig& config, uint64_t seed);
  /// Wraps an existing store (e.g. a loaded checkpoint). Names and shapes
  /// must match what `config` builds.
  Model(const ModelConfig& config, ParamStore<T> store);

  const ModelConfig& config() const { return config_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

  Var<T> encode_ct(const Var<T>& vol, Mode mode, std::vector<Shape>* trace = nullptr) {
    return nets::encode_ct(store_, config_, vol, mode, trace);
  }
  Var<T> style(const Var<T>& img, Domain d) const { return style_branch(store_, config_, img, d); }
  Var<T> content(const Var<T>& img) const { return content_branch(store_, config_, img); }
  AttentionResult<T> pam(const Var<T>& f_ct, const Var<T>& pose, const Var<T>& mip) const {
    return modify_content(store_, config_, f_ct, pose, mip);
  }
  Var<T> generate(const Var<T>& f_c, const Var<T>& f_sty, std::vector<Var<T>>* trace = nullptr) const {
    return nets::generate(store_, config_, f_c, f_sty, trace);
  }
  Var<T> discriminate(const Var<T>& img, const Var<T>& pose) const {
    return nets::discriminate(store_, config_, img, pose);
  }

  /// Parameters updated by the generator-side objective (everything except d.*).
  std::vector<Var<T>> generator_parameters() const;
  std::vector<std::string> generator_parameter_names() const;
  std::vector<Var<T>> discriminator_parameters() const { return store_.parameters("d."); }
  std::vector<std::string> discriminator_parameter_names() const { return store_.parameter_names("d."); }

 private:
  ModelConfig config_;
  ParamStore<T> store_;
};

/// Registers every network's parameters in `s`.
template <class T>
void build_all(ParamStore<T>& s, const ModelConfig& c);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace xrs::nets
