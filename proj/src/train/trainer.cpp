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


#include "xraysynth/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "xraysynth/autodiff/ops.hpp"

namespace xrs::train {

namespace fs = std::filesystem;
using nlohmann::json;
using nets::Domain;

// ---- data --------------------------------------------------------------------

TrainingData TrainingData::load(const vol::DatasetManifest& m, const std::string& split) {
  const std::vector<vol::VolumeEntry>* entries = nullptr;
  if (split == "train") entries = &m.train;
  else if (split == "val") entries = &m.val;
  else throw ContractError("TrainingData::load: split must be train or val, got " + split);
  if (entries->empty()) throw ContractError("TrainingData::load: split " + split + " is empty");
  if (m.style_images.empty()) throw ContractError("TrainingData::load: dataset has no X-ray style images");

  TrainingData d;
  d.poses = m.poses;
  for (const auto& p : d.poses) d.pose_feats.push_back(nets::pose_features(p));
  for (const auto& e : *entries) {
    vol::Volume v = vol::normalized_volume(vol::load_volume(m.resolve(e.path)), m.mu_norm);
    if (v.shape[0] != v.shape[1] || v.shape[1] != v.shape[2])
      throw FormatError("TrainingData::load: volume " + e.id + " is not cubic");
    std::vector<vol::ImagePlane> drrs;
    std::vector<std::vector<double>> mips;
    for (int p = 0; p < static_cast<int>(d.poses.size()); ++p) {
      drrs.push_back(vol::load_image(m.resolve(m.drr(e.id, p).path)));
      mips.push_back(nets::projection_features(v, d.poses[static_cast<size_t>(p)]));
    }
    d.volume_ids.push_back(e.id);
    d.volumes.push_back(std::move(v));
    d.drrs.push_back(std::move(drrs));
    d.mips.push_back(std::move(mips));
  }
  for (const auto& s : m.style_images) d.style_images.push_back(vol::load_image(m.resolve(s.path)));
  d.volume_size = d.volumes.front().shape[0];
  d.image_size = d.drrs.front().front().height;
  for (const auto& img : d.style_images)
    if (img.height != d.image_size || img.width != d.image_size)
      throw FormatError("TrainingData::load: style image size differs from DRR size");
  return d;
}

Batch<float> make_batch(const TrainingData& d, const std::vector<BatchItem>& items) {
  const int64_t b = static_cast<int64_t>(items.size());
  if (b == 0) throw ContractError("make_batch: empty batch");
  const int64_t s = d.volume_size, h = d.image_size;
  const int64_t nv = s * s * s, ni = h * h, nm = s * s, np = 25;
  Batch<float> out;
  out.volume = Tensor<float>({b, 1, s, s, s});
  out.drr = Tensor<float>({b, 1, h, h});
  out.xray = Tensor<float>({b, 1, h, h});
  out.pose = Tensor<float>({b, np});
  out.mip = Tensor<float>({b, nm});
  for (int64_t i = 0; i < b; ++i) {
    const auto& it = items[static_cast<size_t>(i)];
    if (it.volume < 0 || it.volume >= static_cast<int>(d.volumes.size()) || it.pose < 0 ||
        it.pose >= static_cast<int>(d.poses.size()) || it.style < 0 ||
        it.style >= static_cast<int>(d.style_images.size()))
      throw ContractError("make_batch: item index out of range");
    const auto& v = d.volumes[static_cast<size_t>(it.volume)].voxels;
    std::copy(v.begin(), v.end(), out.volume.data() + i * nv);
    const auto& drr = d.drrs[static_cast<size_t>(it.volume)][static_cast<size_t>(it.pose)].pixels;
    std::copy(drr.begin(), drr.end(), out.drr.data() + i * ni);
    const auto& x = d.style_images[static_cast<size_t>(it.style)].pixels;
    std::copy(x.begin(), x.end(), out.xray.data() + i * ni);
    const auto& pf = d.pose_feats[static_cast<size_t>(it.pose)];
    for (int64_t k = 0; k < np; ++k) out.pose[i * np + k] = static_cast<float>(pf[static_cast<size_t>(k)]);
    const auto& mip = d.mips[static_cast<size_t>(it.volume)][static_cast<size_t>(it.pose)];
    for (int64_t k = 0; k < nm; ++k) out.mip[i * nm + k] = static_cast<float>(mip[static_cast<size_t>(k)]);
    out.volume_index.push_back(it.volume);
    out.pose_index.push_back(it.pose);
    out.style_index.push_back(it.style);
  }
  return out;
}

template <class T>
template <class U>
Batch<U> Batch<T>::cast() const {
  Batch<U> o;
  o.volume = volume.template cast<U>();
  o.drr = drr.template cast<U>();
  o.xray = xray.template cast<U>();
  o.pose = pose.template cast<U>();
  o.mip = mip.template cast<U>();
  o.volume_index = volume_index;
  o.pose_index = pose_index;
  o.style_index = style_index;
  return o;
}

template Batch<double> Batch<float>::cast<double>() const;
template Batch<float> Batch<float>::cast<float>() const;

std::vector<BatchItem> draw_batch(const TrainingData& d, int64_t batch_size, uint64_t seed, int64_t step) {
  uint64_t state = ad::splitmix64(ad::splitmix64(seed ^ 0x6261746368ULL) + static_cast<uint64_t>(step));
  auto next = [&](size_t n) {
    state = ad::splitmix64(state);
    return static_cast<int>(state % n);
  };
  std::vector<BatchItem> items;
  for (int64_t i = 0; i < batch_size; ++i) {
    BatchItem it;
    it.volume = next(d.volumes.size());
    it.pose = next(d.poses.size());
    it.style = next(d.style_images.size());
    items.push_back(it);
  }
  return items;
}

// ---- passes ------------------------------------------------------------------

template <class T>
GeneratorPass<T> generator_pass(nets::Model<T>& model, const nets::PerceptualExtractor<T>& perceptual,
                                const Batch<T>& batch, const obj::LossWeights& w, nets::Mode mode) {
  const auto volume = Var<T>::constant(batch.volume);
  const auto drr = Var<T>::constant(batch.drr);
  const auto xray = Var<T>::constant(batch.xray);
  const auto pose = Var<T>::constant(batch.pose);
  const auto mip = Var<T>::constant(batch.mip);

  GeneratorPass<T> p;
  p.f_ct = model.encode_ct(volume, mode);
  auto att = model.pam(p.f_ct, pose, mip);
  p.f_wplus = att.output;
  p.attention = att.weights;
  p.s_x = model.style(xray, Domain::kXray);
  p.s_drr = model.style(drr, Domain::kDrr);
  p.fake_x = model.generate(p.f_wplus, p.s_x);
  p.fake_drr = model.generate(p.f_wplus, p.s_drr);

  p.rec = obj::rec_loss(p.fake_drr, drr, w, perceptual);
  p.cc = obj::mean_row_l2(model.content(p.fake_x), model.content(p.fake_drr));
  p.sc = ad::add(obj::mean_row_l2(p.s_x, model.style(p.fake_x, Domain::kXray)),
                 obj::mean_row_l2(p.s_drr, model.style(p.fake_drr, Domain::kDrr)));
  p.consis = obj::consistency_loss(obj::ConsistencyTerms<T>{p.cc, p.sc}, w);
  p.zero = obj::zero_loss(model, drr, xray);
  p.adv_g = obj::adv_gen_loss(model.discriminate(p.fake_x, pose));
  p.total = obj::total_gan(p.adv_g, p.rec, p.consis, p.zero, w);
  return p;
}

template <class T>
DiscriminatorPass<T> discriminator_pass(const nets::Model<T>& model, const Tensor<T>& fake_x, const Batch<T>& batch,
                                        const obj::LossWeights& w, const obj::R1Options& r1) {
  const auto pose = Var<T>::constant(batch.pose);
  DiscriminatorPass<T> p;
  p.scores_fake = model.discriminate(Var<T>::constant(fake_x), pose);
  p.scores_real = model.discriminate(Var<T>::constant(batch.drr), pose);
  std::function<Var<T>(const Var<T>&)> critic = [&](const Var<T>& x) { return model.discriminate(x, pose); };
  p.r1 = obj::r1_penalty(critic, batch.drr, r1);
  p.adv_d = obj::adv_dis_loss(p.scores_fake, p.scores_real, p.r1, w);
  p.total = obj::total_dis(p.adv_d, w);
  return p;
}

template GeneratorPass<float> generator_pass(nets::Model<float>&, const nets::PerceptualExtractor<float>&,
                                             const Batch<float>&, const obj::LossWeights&, nets::Mode);
template GeneratorPass<double> generator_pass(nets::Model<double>&, const nets::PerceptualExtractor<double>&,
                                              const Batch<double>&, const obj::LossWeights&, nets::Mode);
template DiscriminatorPass<float> discriminator_pass(const nets::Model<float>&, const Tensor<float>&,
                                                     const Batch<float>&, const obj::LossWeights&,
                                                     const obj::R1Options&);
template DiscriminatorPass<double> discriminator_pass(const nets::Model<double>&, const Tensor<double>&,
                                                      const Batch<double>&, const obj::LossWeights&,
                                                      const obj::R1Options&);

obj::R1Mode resolve_r1_mode(const std::string& setting) {
  if (setting == "exact") return obj::R1Mode::kExact;
  if (setting == "fd") return obj::R1Mode::kFiniteDifference;
  if (setting == "auto")
    return ad::double_backward_available() ? obj::R1Mode::kExact : obj::R1Mode::kFiniteDifference;
  throw ConfigError("unknown r1_mode '" + setting + "'");
}

// ---- trainer -----------------------------------------------------------------

namespace {

std::string step_name(int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06lld", static_cast<long long>(step));
  return buf;
}

Adam::Options adam_options(const TrainSettings& t) { return {t.lr, t.beta1, t.beta2, t.adam_eps}; }

}  // namespace

Trainer::Trainer(Config config, const vol::DatasetManifest& manifest, fs::path out_dir)
    : config_(std::move(config)),
      out_dir_(std::move(out_dir)),
      data_(TrainingData::load(manifest, "train")),
      perceptual_(config_.eval.extractor_seed),
      r1_mode_(resolve_r1_mode(config_.train.r1_mode)) {
  config_.validate();
  if (data_.volume_size != config_.model.volume_size || data_.image_size != config_.model.image_size)
    throw ConfigError("dataset sizes (" + std::to_string(data_.volume_size) + "^3 volumes, " +
                      std::to_string(data_.image_size) + "^2 images) do not match the model config");
  dataset_meta_ = json{{"mu_norm", manifest.mu_norm},
                       {"norm_scale", manifest.norm_scale},
                       {"projection", manifest.projection.to_json()}};
  model_ = std::make_unique<nets::Model<float>>(config_.model, config_.seed);
  adam_g_ = std::make_unique<Adam>(model_->store(), model_->generator_parameter_names(),
                                   adam_options(config_.train));
  adam_d_ = std::make_unique<Adam>(model_->store(), model_->discriminator_parameter_names(),
                                   adam_options(config_.train));
}

fs::path Trainer::checkpoint_dir_for(int64_t step) const { return out_dir_ / "checkpoints" / step_name(step); }

fs::path Trainer::save_checkpoint(const fs::path& dir) {
  model_->store().meta() = json{{"step", step_},
                                {"config_hash", config_.hash_hex()},
                                {"config", config_.to_json()},
                                {"dataset", dataset_meta_}};
  model_->store().save(dir);
  return dir;
}

void Trainer::resume(const fs::path& dir) {
  const CheckpointInfo info = read_checkpoint_info(dir);
  if (info.config_hash != config_.hash_hex())
    throw ConfigError("refusing to resume from " + dir.string() + ": checkpoint config hash " + info.config_hash +
                      " differs from the current " + config_.hash_hex());
  auto store = ad::ParamStore<float>::load(dir);
  model_ = std::make_unique<nets::Model<float>>(config_.model, std::move(store));
  adam_g_ = std::make_unique<Adam>(model_->store(), model_->generator_parameter_names(),
                                   adam_options(config_.train));
  adam_d_ = std::make_unique<Adam>(model_->store(), model_->discriminator_parameter_names(),
                                   adam_options(config_.train));
  step_ = info.step;
  if (!out_dir_.empty()) truncate_log(step_);
}

obj::LossReport Trainer::step() {
  const auto& t = config_.train;
  const auto batch = make_batch(data_, draw_batch(data_, t.batch_size, config_.seed, step_));
  obj::LossReport r;
  r.step = step_;
  try {
    auto g = generator_pass(*model_, perceptual_, batch, config_.loss, nets::Mode::kTrain);
    if (!std::isfinite(g.total.item())) throw ad::NonFiniteError("generator total loss is not finite");
    adam_g_->step(ad::grad(g.total, model_->generator_parameters()), step_ + 1);
    r.l_rec = g.rec.item();
    r.l_cc = g.cc.item();
    r.l_sc = g.sc.item();
    r.l_0 = g.zero.item();
    r.l_adv_g = g.adv_g.item();
    r.total_g = g.total.item();

    const Tensor<float> fake = g.fake_x.value();
    for (int64_t k = 0; k < t.d_steps; ++k) {
      obj::R1Options ro;
      ro.mode = r1_mode_;
      ro.epsilon = t.r1_epsilon;
      ro.directions = t.r1_fd_directions;
      ro.seed = ad::splitmix64(config_.seed * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(step_ * t.d_steps + k));
      auto d = discriminator_pass(*model_, fake, batch, config_.loss, ro);
      if (!std::isfinite(d.total.item())) throw ad::NonFiniteError("discriminator total loss is not finite");
      adam_d_->step(ad::grad(d.total, model_->discriminator_parameters()), step_ * t.d_steps + k + 1);
      r.l_adv_d = d.adv_d.item();
      r.r1 = d.r1.item();
      r.total_d = d.total.item();
    }
  } catch (const ad::NonFiniteError&) {
    if (!out_dir_.empty()) {
      const auto dir = out_dir_ / "checkpoints" / ("abort_" + step_name(step_));
      save_checkpoint(dir);
      std::cerr << "non-finite loss at step " << step_ << "; state saved to " << dir.string() << "\n";
    }
    throw;
  }
  ++step_;
  return r;
}

std::vector<obj::LossReport> Trainer::run(int64_t until_step) {
  const auto& t = config_.train;
  const bool write = !out_dir_.empty();
  const fs::path log = out_dir_ / "train_log.jsonl";
  if (write) {
    fs::create_directories(out_dir_ / "checkpoints");
    if (step_ == 0) {
      if (fs::exists(log)) fs::remove(log);
      save_checkpoint(checkpoint_dir_for(0));
    }
  }
  std::vector<obj::LossReport> reports;
  while (step_ < until_step) {
    reports.push_back(step());
    const auto& r = reports.back();
    if (!write) continue;
    append_jsonl(log, r.to_json());
    if (step_ % 10 == 0 || step_ == until_step)
      std::cerr << "step " << step_ << "/" << until_step << "  rec " << r.l_rec << "  total_g " << r.total_g
                << "  total_d " << r.total_d << "\n";
    if (t.checkpoint_every > 0 && step_ % t.checkpoint_every == 0) save_checkpoint(checkpoint_dir_for(step_));
    if (t.preview_every > 0 && step_ % t.preview_every == 0) write_preview(step_);
  }
  if (write && !fs::exists(checkpoint_dir_for(step_) / "manifest.json")) save_checkpoint(checkpoint_dir_for(step_));
  return reports;
}

void Trainer::write_preview(int64_t step) const {
  ad::NoGrad no_grad;
  std::vector<BatchItem> items;
  const int n = std::min<int>(4, static_cast<int>(data_.volumes.size()));
  for (int i = 0; i < n; ++i)
    items.push_back({i, i % static_cast<int>(data_.poses.size()), i % static_cast<int>(data_.style_images.size())});
  const auto batch = make_batch(data_, items);
  const int64_t h = data_.image_size;
  auto f_ct = model_->encode_ct(Var<float>::constant(batch.volume), nets::Mode::kEval);
  auto f = model_->pam(f_ct, Var<float>::constant(batch.pose), Var<float>::constant(batch.mip)).output;
  auto fake_x = model_->generate(f, model_->style(Var<float>::constant(batch.xray), Domain::kXray));
  auto fake_drr = model_->generate(f, model_->style(Var<float>::constant(batch.drr), Domain::kDrr));
  auto plane = [&](const Tensor<float>& t, int i) {
    vol::ImagePlane p(h, h);
    std::copy(t.data() + i * h * h, t.data() + (i + 1) * h * h, p.pixels.begin());
    return p;
  };
  std::vector<vol::ImagePlane> rows;
  for (int i = 0; i < n; ++i)
    rows.push_back(vol::tile_horizontal({plane(fake_x.value(), i), plane(fake_drr.value(), i), plane(batch.drr, i)}));
  fs::create_directories(out_dir_ / "previews");
  vol::write_pgm16(vol::tile_vertical(rows), out_dir_ / "previews" / (step_name(step) + ".pgm"));
}

void Trainer::truncate_log(int64_t from_step) const {
  const fs::path log = out_dir_ / "train_log.jsonl";
  if (!fs::exists(log)) return;
  std::vector<std::string> keep;
  {
    std::ifstream is(log);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (json::parse(line).at("step").get<int64_t>() < from_step) keep.push_back(line);
    }
  }
  std::ofstream os(log, std::ios::trunc);
  for (const auto& l : keep) os << l << "\n";
}

// ---- checkpoints and logs ----------------------------------------------------

CheckpointInfo read_checkpoint_info(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw FormatError("no checkpoint manifest in " + dir.string());
  json m;
  try {
    is >> m;
  } catch (const json::exception& e) {
    throw FormatError(dir.string() + "/manifest.json: " + e.what());
  }
  const json meta = m.value("meta", json::object());
  if (!meta.contains("config_hash") || !meta.contains("config") || !meta.contains("step"))
    throw FormatError(dir.string() + " is a parameter store without training metadata");
  CheckpointInfo info;
  info.step = meta.at("step").get<int64_t>();
  info.config_hash = meta.at("config_hash").get<std::string>();
  info.config = Config::from_json(meta.at("config"));
  if (meta.contains("dataset")) {
    const json& d = meta["dataset"];
    info.mu_norm = d.at("mu_norm").get<double>();
    info.norm_scale = d.at("norm_scale").get<double>();
    info.projection = geom::ProjectionConfig::from_json(d.at("projection"));
  }
  return info;
}

std::unique_ptr<nets::Model<float>> load_model(const fs::path& dir, CheckpointInfo* info) {
  CheckpointInfo ci = read_checkpoint_info(dir);
  auto model = std::make_unique<nets::Model<float>>(ci.config.model, ad::ParamStore<float>::load(dir));
  if (info) *info = std::move(ci);
  return model;
}

void append_jsonl(const fs::path& file, const json& j) {
  std::ofstream os(file, std::ios::app);
  if (!os) throw FormatError("cannot append to " + file.string());
  os << j.dump() << "\n";
}

std::vector<obj::LossReport> read_log(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw FormatError("cannot read " + file.string());
  std::vector<obj::LossReport> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(obj::LossReport::from_json(json::parse(line)));
  return out;
}

}  // namespace xrs::train
