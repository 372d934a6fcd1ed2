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


#include "xraysynth/nets/model.hpp"

#include <cmath>

namespace xrs::nets {

using nlohmann::json;

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.image_size = 256;
  c.volume_size = 128;
  c.gen_layers = 14;
  c.gen_content_layers = 8;
  return c;
}

namespace {

bool is_pow2(int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

int64_t log2i(int64_t v) {
  int64_t l = 0;
  while ((int64_t{1} << l) < v) ++l;
  return l;
}

}  // namespace

int64_t ModelConfig::synthesis_layers() const {
  if (gen_layers > 0) return gen_layers;
  // Two layers per resolution from 4x4 up to image_size.
  return 2 * (log2i(image_size) - 2) + 2;
}

int64_t ModelConfig::content_layers() const {
  if (gen_content_layers >= 0) return gen_content_layers;
  return static_cast<int64_t>(std::lround(static_cast<double>(synthesis_layers()) * 8.0 / 14.0));
}

double ModelConfig::temperature() const {
  return tau > 0.0 ? tau : std::sqrt(static_cast<double>(d_c) / static_cast<double>(heads));
}

int64_t ModelConfig::layer_resolution(int64_t i) const { return int64_t{4} << ((i - 1) / 2); }

int64_t ModelConfig::layer_channels(int64_t i) const {
  const int64_t level = (i - 1) / 2;  // 0 at 4x4
  const int64_t shift = level <= 1 ? 0 : level - 1;
  const int64_t ch = shift >= 62 ? 0 : gen_channels_max >> shift;
  return std::max(gen_channels_min, ch);
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model: " + m); };
  if (!is_pow2(image_size) || image_size < 8) fail("image_size must be a power of two >= 8");
  if (volume_size < 8 || volume_size % 8 != 0)
    fail("volume_size must be divisible by 2^3 (three halving layers), got " + std::to_string(volume_size));
  if (d_c < 1 || d_s < 1 || d_p < 1) fail("code widths must be >= 1");
  if (heads < 1 || d_c % heads != 0)
    fail("d_c (" + std::to_string(d_c) + ") is not divisible by heads (" + std::to_string(heads) + ")");
  if (ct_channels.size() != 5) fail("ct_channels needs 5 entries");
  if (sty_channels.size() != 6) fail("sty_channels needs 6 entries");
  if (disc_channels.empty()) fail("disc_channels must not be empty");
  for (auto v : ct_channels) if (v < 1) fail("channel counts must be >= 1");
  for (auto v : sty_channels) if (v < 1) fail("channel counts must be >= 1");
  for (auto v : disc_channels) if (v < 1) fail("channel counts must be >= 1");
  if (gen_channels_min < 1 || gen_channels_max < gen_channels_min) fail("bad generator channel range");
  if (pam_hidden < 1) fail("pam_hidden must be >= 1");
  const int64_t L = synthesis_layers();
  if (L < 1) fail("at least one synthesis layer required");
  if (layer_resolution(L) != image_size)
    fail(std::to_string(L) + " synthesis layers end at " + std::to_string(layer_resolution(L)) +
         " px, not image_size " + std::to_string(image_size));
  const int64_t kc = content_layers();
  if (kc < 0 || kc > L) fail("content layer count out of range");
  if (!(temperature() > 0.0)) fail("tau must be > 0");
}

json ModelConfig::to_json() const {
  return json{{"image_size", image_size},       {"volume_size", volume_size},
              {"d_c", d_c},                     {"d_s", d_s},
              {"d_p", d_p},                     {"heads", heads},
              {"tau", tau},                     {"ct_channels", ct_channels},
              {"sty_channels", sty_channels},   {"disc_channels", disc_channels},
              {"gen_layers", gen_layers},       {"gen_content_layers", gen_content_layers},
              {"gen_channels_max", gen_channels_max}, {"gen_channels_min", gen_channels_min},
              {"pam_hidden", pam_hidden}};
}

template <class T>
void build_all(ParamStore<T>& s, const ModelConfig& c) {
  c.validate();
  build_ct_encoder(s, c);
  build_style_branch(s, c, Domain::kXray);
  build_style_branch(s, c, Domain::kDrr);
  build_content_branch(s, c);
  build_pam(s, c);
  build_generator(s, c);
  build_discriminator(s, c);
}

template <class T>
Model<T>::Model(const ModelConfig& config, uint64_t seed) : config_(config), store_(seed) {
  build_all(store_, config_);
}

template <class T>
Model<T>::Model(const ModelConfig& config, ParamStore<T> store) : config_(config), store_(std::move(store)) {
  ParamStore<T> reference(store_.seed());
  build_all(reference, config_);
  // Optimizer state ("opt.*") may ride along in the same store.
  size_t model_entries = 0;
  for (const auto& n : store_.names())
    if (n.rfind("opt.", 0) != 0) ++model_entries;
  if (reference.names().size() != model_entries)
    throw FormatError("checkpoint does not match the model configuration (entry count " +
                      std::to_string(model_entries) + " vs " + std::to_string(reference.names().size()) + ")");
  for (const auto& n : reference.names()) {
    if (!store_.contains(n)) throw FormatError("checkpoint is missing parameter " + n);
    if (store_.get(n).shape() != reference.get(n).shape())
      throw FormatError("checkpoint parameter " + n + " has shape " + ad::to_string(store_.get(n).shape()) +
                        ", expected " + ad::to_string(reference.get(n).shape()));
  }
}

template <class T>
std::vector<Var<T>> Model<T>::generator_parameters() const {
  std::vector<Var<T>> out;
  for (const auto& n : generator_parameter_names()) out.push_back(store_.get(n));
  return out;
}

template <class T>
std::vector<std::string> Model<T>::generator_parameter_names() const {
  std::vector<std::string> out;
  for (const auto& n : store_.parameter_names())
    if (n.rfind("d.", 0) != 0) out.push_back(n);
  return out;
}

template void build_all(ParamStore<float>&, const ModelConfig&);
template void build_all(ParamStore<double>&, const ModelConfig&);
template class Model<float>;
template class Model<double>;

}  // namespace xrs::nets
