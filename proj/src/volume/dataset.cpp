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


#include "xraysynth/volume/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "xraysynth/autodiff/param_store.hpp"
#include "xraysynth/geometry/render.hpp"
#include "xraysynth/volume/pseudo_xray.hpp"

namespace xrs::vol {

namespace fs = std::filesystem;
using nlohmann::json;

void DatasetConfig::validate() const {
  if (n_train < 1) throw ContractError("dataset: n_train must be >= 1");
  if (n_val < 0 || n_style < 1) throw ContractError("dataset: n_val >= 0 and n_style >= 1 required");
  if (horiz_deg.empty()) throw ContractError("dataset: pose sweep is empty");
  phantom.validate();
  projection.validate();
}

json dataset_config_to_json(const DatasetConfig& c) {
  return json{{"seed", c.seed},
              {"n_train", c.n_train},
              {"n_val", c.n_val},
              {"n_style", c.n_style},
              {"volume_size", c.phantom.size},
              {"spacing_mm", c.phantom.spacing_mm},
              {"bone_bodies", c.phantom.bone_bodies},
              {"mu_bone", c.phantom.mu_bone},
              {"mu_soft", c.phantom.mu_soft},
              {"horiz_deg", c.horiz_deg},
              {"vert_deg", c.vert_deg},
              {"projection", c.projection.to_json()}};
}

const DrrEntry& DatasetManifest::drr(const std::string& volume_id, int pose_index) const {
  for (const auto& d : drrs)
    if (d.volume_id == volume_id && d.pose_index == pose_index) return d;
  throw ContractError("manifest: no DRR for " + volume_id + " pose " + std::to_string(pose_index));
}

const VolumeEntry& DatasetManifest::volume(const std::string& id) const {
  for (const auto* list : {&train, &val, &style_volumes})
    for (const auto& v : *list)
      if (v.id == id) return v;
  throw ContractError("manifest: unknown volume " + id);
}

namespace {

json volumes_json(const std::vector<VolumeEntry>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back({{"id", v.id}, {"seed", v.seed}, {"path", v.path}});
  return a;
}

std::vector<VolumeEntry> volumes_from(const json& a) {
  std::vector<VolumeEntry> out;
  for (const auto& e : a) out.push_back({e.at("id").get<std::string>(), e.at("seed").get<uint64_t>(),
                                         e.at("path").get<std::string>()});
  return out;
}

std::string hex_id(const char* prefix, uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%012llx", prefix,
                static_cast<unsigned long long>(seed & 0xffffffffffffULL));
  return buf;
}

std::string angle_tag(double deg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "h%+04d", static_cast<int>(std::lround(deg)));
  return buf;
}

}  // namespace

json DatasetManifest::to_json() const {
  json j;
  j["format"] = "xraysynth-dataset";
  j["version"] = 1;
  j["train"] = volumes_json(train);
  j["val"] = volumes_json(val);
  j["style_volumes"] = volumes_json(style_volumes);
  j["poses"] = json::array();
  for (const auto& p : poses) j["poses"].push_back(p.to_json());
  j["drrs"] = json::array();
  for (const auto& d : drrs)
    j["drrs"].push_back({{"volume_id", d.volume_id}, {"pose_index", d.pose_index}, {"path", d.path}});
  j["style_images"] = json::array();
  for (const auto& s : style_images)
    j["style_images"].push_back({{"source_id", s.source_id},
                                 {"pose_index", s.pose_index},
                                 {"style_seed", s.style_seed},
                                 {"path", s.path}});
  j["mu_norm"] = mu_norm;
  j["norm_scale"] = norm_scale;
  j["projection"] = projection.to_json();
  j["config"] = config;
  return j;
}

DatasetManifest DatasetManifest::from_json(const json& j, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  try {
    if (j.value("format", "") != "xraysynth-dataset") throw FormatError("manifest: wrong format tag");
    m.train = volumes_from(j.at("train"));
    m.val = volumes_from(j.at("val"));
    m.style_volumes = volumes_from(j.at("style_volumes"));
    for (const auto& p : j.at("poses")) m.poses.push_back(geom::CameraPose::from_json(p));
    for (const auto& d : j.at("drrs"))
      m.drrs.push_back({d.at("volume_id").get<std::string>(), d.at("pose_index").get<int>(),
                        d.at("path").get<std::string>()});
    for (const auto& s : j.at("style_images"))
      m.style_images.push_back({s.at("source_id").get<std::string>(), s.at("pose_index").get<int>(),
                                s.at("style_seed").get<uint64_t>(), s.at("path").get<std::string>()});
    m.mu_norm = j.at("mu_norm").get<double>();
    m.norm_scale = j.at("norm_scale").get<double>();
    m.projection = geom::ProjectionConfig::from_json(j.at("projection"));
    m.config = j.value("config", json::object());
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

void DatasetManifest::save(const fs::path& file) const {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + file.string());
  os << to_json().dump(2) << '\n';
  if (!os) throw FormatError("write failed: " + file.string());
}

DatasetManifest DatasetManifest::load(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw FormatError("cannot open manifest " + file.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
  return from_json(j, file.parent_path());
}

void DatasetManifest::verify() const {
  std::set<std::string> content, style;
  for (const auto* list : {&train, &val})
    for (const auto& v : *list)
      if (!content.insert(v.id).second) throw FormatError("manifest: duplicate content volume " + v.id);
  std::set<std::string> train_ids;
  for (const auto& v : train) train_ids.insert(v.id);
  for (const auto& v : val)
    if (train_ids.count(v.id)) throw FormatError("manifest: train/val overlap on " + v.id);
  for (const auto& v : style_volumes) {
    if (content.count(v.id)) throw FormatError("manifest: style volume " + v.id + " is also a content volume");
    style.insert(v.id);
  }
  for (const auto* list : {&train, &val, &style_volumes})
    for (const auto& v : *list) (void)load_volume(resolve(v.path));
  for (const auto& d : drrs) {
    if (!content.count(d.volume_id)) throw FormatError("manifest: DRR for unknown volume " + d.volume_id);
    if (d.pose_index < 0 || d.pose_index >= static_cast<int>(poses.size()))
      throw FormatError("manifest: DRR pose index out of range");
    (void)load_image(resolve(d.path));
  }
  for (const auto& s : style_images) {
    if (!style.count(s.source_id)) throw FormatError("manifest: style image from non-style volume " + s.source_id);
    (void)load_image(resolve(s.path));
  }
}

Volume normalized_volume(const Volume& v, double mu_norm) {
  if (!(mu_norm > 0.0)) throw ContractError("normalized_volume: mu_norm must be > 0");
  Volume out = v;
  for (auto& x : out.voxels) x = static_cast<float>(static_cast<double>(x) / mu_norm);
  return out;
}

namespace {

class FileTracker {
 public:
  void add(const fs::path& p) { files_.push_back(p); }
  void add_raw(const fs::path& base) {
    add(fs::path(base.string() + ".f32"));
    add(fs::path(base.string() + ".json"));
  }
  void add_dir(const fs::path& d) { dirs_.push_back(d); }
  void rollback() noexcept {
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it)
      if (fs::is_empty(*it, ec)) fs::remove(*it, ec);
  }

 private:
  std::vector<fs::path> files_;
  std::vector<fs::path> dirs_;
};

}  // namespace

DatasetManifest build_dataset(const DatasetConfig& config, const fs::path& out_dir) {
  config.validate();
  FileTracker tracker;
  try {
    std::error_code ec;
    for (const char* sub : {"", "volumes", "drr", "xray"}) {
      const fs::path d = sub[0] ? out_dir / sub : out_dir;
      if (!fs::exists(d)) {
        if (!fs::create_directories(d, ec) || ec) throw FormatError("cannot create directory " + d.string());
        tracker.add_dir(d);
      }
    }

    DatasetManifest m;
    m.root = out_dir;
    m.projection = config.projection;
    m.config = dataset_config_to_json(config);
    for (double h : config.horiz_deg) m.poses.push_back(geom::pose_from_angles(h, config.vert_deg, config.projection));

    // Content and style phantoms come from separate seed streams.
    std::vector<std::pair<VolumeEntry, Volume>> content, held_out;
    std::set<std::string> content_ids;
    const int n_content = config.n_train + config.n_val;
    for (int i = 0; i < n_content; ++i) {
      const uint64_t s = ad::splitmix64(config.seed * 0x1000193ULL + 2 * static_cast<uint64_t>(i) + 1);
      VolumeEntry e{hex_id("ct", s), s, "volumes/" + hex_id("ct", s)};
      content_ids.insert(e.id);
      content.emplace_back(e, generate_phantom(config.phantom, s));
    }
    for (int i = 0; i < config.n_style; ++i) {
      const uint64_t s = ad::splitmix64((config.seed ^ 0x5717e5ULL) * 0x100000001b3ULL + 2 * static_cast<uint64_t>(i));
      VolumeEntry e{hex_id("ph", s), s, "volumes/" + hex_id("ph", s)};
      for (const auto& c : content)
        if (c.first.seed == s) throw ContractError("dataset: style and content volume sets intersect at " + e.id);
      held_out.emplace_back(e, generate_phantom(config.phantom, s));
    }

    double mu_max = 0.0;
    for (const auto& c : content) mu_max = std::max(mu_max, static_cast<double>(c.second.max_value()));
    m.mu_norm = mu_max > 0.0 ? mu_max : 1.0;

    // Raw path integrals first, so the normalisation scale is the dataset max.
    std::vector<std::vector<ImagePlane>> raw_content, raw_style;
    double a_max = 0.0;
    auto render_all = [&](const Volume& v) {
      std::vector<ImagePlane> out;
      for (const auto& p : m.poses) {
        out.push_back(geom::render_path_integral(v, p, config.projection));
        for (float x : out.back().pixels) a_max = std::max(a_max, static_cast<double>(x));
      }
      return out;
    };
    for (const auto& c : content) raw_content.push_back(render_all(c.second));
    for (const auto& h : held_out) raw_style.push_back(render_all(h.second));
    m.norm_scale = a_max > 0.0 ? a_max : 1.0;

    auto normalise = [&](ImagePlane img) {
      for (auto& x : img.pixels) x = static_cast<float>(std::clamp(static_cast<double>(x) / m.norm_scale, 0.0, 1.0));
      return img;
    };

    for (size_t i = 0; i < content.size(); ++i) {
      const auto& [entry, volume] = content[i];
      save_volume(volume, out_dir / entry.path);
      tracker.add_raw(out_dir / entry.path);
      (static_cast<int>(i) < config.n_train ? m.train : m.val).push_back(entry);
      for (size_t p = 0; p < m.poses.size(); ++p) {
        DrrEntry d{entry.id, static_cast<int>(p), "drr/" + entry.id + "_" + angle_tag(config.horiz_deg[p])};
        save_image(normalise(raw_content[i][p]), out_dir / d.path);
        tracker.add_raw(out_dir / d.path);
        m.drrs.push_back(d);
      }
    }
    for (size_t i = 0; i < held_out.size(); ++i) {
      const auto& [entry, volume] = held_out[i];
      save_volume(volume, out_dir / entry.path);
      tracker.add_raw(out_dir / entry.path);
      m.style_volumes.push_back(entry);
      for (size_t p = 0; p < m.poses.size(); ++p) {
        const ImagePlane drr = normalise(raw_style[i][p]);
        // Each style image gets its own appearance draw. A draw that leaves
        // the image nearly unchanged is replaced by the next seed.
        uint64_t style_seed = ad::splitmix64(entry.seed + 7919 * (p + 1));
        ImagePlane x = make_pseudo_xray(drr, style_seed);
        for (int attempt = 0; mean_abs_difference(x, drr) <= 0.02; ++attempt) {
          if (attempt >= 16) throw ContractError("dataset: pseudo-X-ray transform is near identity for " + entry.id);
          style_seed = ad::splitmix64(style_seed);
          x = make_pseudo_xray(drr, style_seed);
        }
        StyleEntry s{entry.id, static_cast<int>(p), style_seed,
                     "xray/" + entry.id + "_" + angle_tag(config.horiz_deg[p])};
        save_image(x, out_dir / s.path);
        tracker.add_raw(out_dir / s.path);
        m.style_images.push_back(s);
      }
    }

    tracker.add(out_dir / "manifest.json");
    m.save(out_dir / "manifest.json");
    return m;
  } catch (...) {
    tracker.rollback();
    throw;
  }
}

}  // namespace xrs::vol
