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


#include "xraysynth/train/config.hpp"

#include <cstdio>
#include <fstream>

#include "xraysynth/autodiff/param_store.hpp"

namespace xrs::train {

using nlohmann::json;

Config::Config() {
  dataset.phantom.size = model.volume_size;
  dataset.projection.det_px = model.image_size;
}

json Config::to_json() const {
  json t{{"batch_size", train.batch_size},
         {"lr", train.lr},
         {"beta1", train.beta1},
         {"beta2", train.beta2},
         {"adam_eps", train.adam_eps},
         {"steps", train.steps},
         {"epochs", train.epochs},
         {"checkpoint_every", train.checkpoint_every},
         {"preview_every", train.preview_every},
         {"d_steps", train.d_steps},
         {"r1_mode", train.r1_mode},
         {"r1_epsilon", train.r1_epsilon},
         {"r1_fd_directions", train.r1_fd_directions}};
  json e{{"extractor_seed", eval.extractor_seed}, {"angles", eval.angles}, {"kid_degree", eval.kid_degree}};
  return json{{"seed", seed},
              {"dataset_dir", dataset_dir},
              {"dataset", vol::dataset_config_to_json(dataset)},
              {"model", model.to_json()},
              {"loss", loss.to_json()},
              {"train", t},
              {"eval", e}};
}

namespace {

template <class V>
void read(const json& j, const char* key, V& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for " + path + key + ": " + j.at(key).dump());
  }
}

}  // namespace

Config Config::from_json(const json& j) {
  Config c;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  read(j, "seed", c.seed, "");
  read(j, "dataset_dir", c.dataset_dir, "");
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    const std::string p = "dataset.";
    read(d, "seed", c.dataset.seed, p);
    read(d, "n_train", c.dataset.n_train, p);
    read(d, "n_val", c.dataset.n_val, p);
    read(d, "n_style", c.dataset.n_style, p);
    read(d, "volume_size", c.dataset.phantom.size, p);
    read(d, "spacing_mm", c.dataset.phantom.spacing_mm, p);
    read(d, "bone_bodies", c.dataset.phantom.bone_bodies, p);
    read(d, "mu_bone", c.dataset.phantom.mu_bone, p);
    read(d, "mu_soft", c.dataset.phantom.mu_soft, p);
    read(d, "horiz_deg", c.dataset.horiz_deg, p);
    read(d, "vert_deg", c.dataset.vert_deg, p);
    if (d.contains("projection")) c.dataset.projection = geom::ProjectionConfig::from_json(d["projection"]);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    const std::string p = "model.";
    read(m, "image_size", c.model.image_size, p);
    read(m, "volume_size", c.model.volume_size, p);
    read(m, "d_c", c.model.d_c, p);
    read(m, "d_s", c.model.d_s, p);
    read(m, "d_p", c.model.d_p, p);
    read(m, "heads", c.model.heads, p);
    read(m, "tau", c.model.tau, p);
    read(m, "ct_channels", c.model.ct_channels, p);
    read(m, "sty_channels", c.model.sty_channels, p);
    read(m, "disc_channels", c.model.disc_channels, p);
    read(m, "gen_layers", c.model.gen_layers, p);
    read(m, "gen_content_layers", c.model.gen_content_layers, p);
    read(m, "gen_channels_max", c.model.gen_channels_max, p);
    read(m, "gen_channels_min", c.model.gen_channels_min, p);
    read(m, "pam_hidden", c.model.pam_hidden, p);
  }
  if (j.contains("loss")) {
    const json& l = j["loss"];
    const std::string p = "loss.";
    read(l, "mae", c.loss.mae, p);
    read(l, "lpips", c.loss.lpips, p);
    read(l, "cc", c.loss.cc, p);
    read(l, "sc", c.loss.sc, p);
    read(l, "zero", c.loss.zero, p);
    read(l, "adv", c.loss.adv, p);
    read(l, "r1", c.loss.r1, p);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    const std::string p = "train.";
    read(t, "batch_size", c.train.batch_size, p);
    read(t, "lr", c.train.lr, p);
    read(t, "beta1", c.train.beta1, p);
    read(t, "beta2", c.train.beta2, p);
    read(t, "adam_eps", c.train.adam_eps, p);
    read(t, "steps", c.train.steps, p);
    read(t, "epochs", c.train.epochs, p);
    read(t, "checkpoint_every", c.train.checkpoint_every, p);
    read(t, "preview_every", c.train.preview_every, p);
    read(t, "d_steps", c.train.d_steps, p);
    read(t, "r1_mode", c.train.r1_mode, p);
    read(t, "r1_epsilon", c.train.r1_epsilon, p);
    read(t, "r1_fd_directions", c.train.r1_fd_directions, p);
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    const std::string p = "eval.";
    read(e, "extractor_seed", c.eval.extractor_seed, p);
    read(e, "angles", c.eval.angles, p);
    read(e, "kid_degree", c.eval.kid_degree, p);
  }
  return c;
}

void Config::validate() const {
  try {
    model.validate();
    loss.validate();
    dataset.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (model.image_size != dataset.projection.det_px)
    throw ConfigError("config: model.image_size (" + std::to_string(model.image_size) +
                      ") must equal dataset.projection.det_px (" + std::to_string(dataset.projection.det_px) + ")");
  if (model.volume_size != dataset.phantom.size)
    throw ConfigError("config: model.volume_size (" + std::to_string(model.volume_size) +
                      ") must equal dataset.volume_size (" + std::to_string(dataset.phantom.size) + ")");
  if (train.batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
  if (!(train.lr > 0.0)) throw ConfigError("config: train.lr must be > 0");
  if (train.beta1 < 0.0 || train.beta1 >= 1.0 || train.beta2 < 0.0 || train.beta2 >= 1.0)
    throw ConfigError("config: Adam betas must lie in [0, 1)");
  if (train.steps < 0 || train.epochs < 0) throw ConfigError("config: train.steps and train.epochs must be >= 0");
  if (train.checkpoint_every < 0 || train.preview_every < 0) throw ConfigError("config: cadences must be >= 0");
  if (train.d_steps < 1) throw ConfigError("config: train.d_steps must be >= 1");
  if (train.r1_mode != "auto" && train.r1_mode != "exact" && train.r1_mode != "fd")
    throw ConfigError("config: train.r1_mode must be auto, exact or fd");
  if (!(train.r1_epsilon > 0.0)) throw ConfigError("config: train.r1_epsilon must be > 0");
  if (eval.kid_degree < 1) throw ConfigError("config: eval.kid_degree must be >= 1");
}

uint64_t Config::hash() const {
  json j = to_json();
  j.erase("dataset_dir");
  for (const char* k : {"steps", "epochs", "checkpoint_every", "preview_every"}) j["train"].erase(k);
  j.erase("eval");
  const std::string s = j.dump();
  return ad::fnv1a64(s.data(), s.size());
}

std::string Config::hash_hex() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

int64_t Config::total_steps(int64_t n_train) const {
  if (train.epochs > 0) return train.epochs * ((n_train + train.batch_size - 1) / train.batch_size);
  return train.steps;
}

std::vector<std::string> unknown_keys(const json& user, const json& schema, const std::string& prefix) {
  std::vector<std::string> out;
  if (!user.is_object()) return out;
  for (const auto& [k, v] : user.items()) {
    const std::string path = prefix.empty() ? k : prefix + "." + k;
    if (!schema.is_object() || !schema.contains(k)) {
      out.push_back(path);
      continue;
    }
    if (v.is_object()) {
      auto sub = unknown_keys(v, schema[k], path);
      out.insert(out.end(), sub.begin(), sub.end());
    }
  }
  return out;
}

void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &root;
  size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

Config load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  const json schema = Config().to_json();
  json merged = schema;
  auto check = [&](const json& user, const std::string& origin) {
    const auto bad = unknown_keys(user, schema);
    if (!bad.empty()) {
      std::string msg = origin + ": unknown config keys:";
      for (const auto& b : bad) msg += " " + b;
      throw ConfigError(msg);
    }
  };
  if (!file.empty()) {
    std::ifstream is(file);
    if (!is) throw ConfigError("cannot open config file " + file.string());
    json user;
    try {
      is >> user;
    } catch (const json::exception& e) {
      throw ConfigError(file.string() + ": " + e.what());
    }
    check(user, file.string());
    merged.merge_patch(user);
  }
  json patch = json::object();
  for (const auto& o : overrides) apply_override(patch, o);
  check(patch, "--set");
  merged.merge_patch(patch);
  Config c = Config::from_json(merged);
  c.validate();
  return c;
}

}  // namespace xrs::train
