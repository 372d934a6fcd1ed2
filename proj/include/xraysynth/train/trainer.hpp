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
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "xraysynth/nets/model.hpp"
#include "xraysynth/nets/perceptual.hpp"
#include "xraysynth/objectives/losses.hpp"
#include "xraysynth/train/adam.hpp"
#include "xraysynth/train/config.hpp"
#include "xraysynth/volume/dataset.hpp"

namespace xrs::train {

using ad::Tensor;
using ad::Var;

/// Everything a split needs in memory: normalised volumes, the DRR sweep,
/// per-pose feature vectors, rotated-volume MIPs and the style images.
struct TrainingData {
  int64_t image_size = 0;
  int64_t volume_size = 0;
  std::vector<std::string> volume_ids;
  std::vector<vol::Volume> volumes;  // normalised to [0,1] by the manifest's mu_norm
  std::vector<geom::CameraPose> poses;
  std::vector<std::vector<double>> pose_feats;
  std::vector<std::vector<vol::ImagePlane>> drrs;     // [volume][pose]
  std::vector<std::vector<std::vector<double>>> mips; // [volume][pose]
  std::vector<vol::ImagePlane> style_images;

  /// `split` is "train" or "val".
  static TrainingData load(const vol::DatasetManifest& m, const std::string& split);
};

template <class T>
struct Batch {
  Tensor<T> volume;  // [B, 1, S, S, S]
  Tensor<T> drr;     // [B, 1, H, W]
  Tensor<T> xray;    // [B, 1, H, W]
  Tensor<T> pose;    // [B, 25]
  Tensor<T> mip;     // [B, S * S]
  std::vector<int> volume_index, pose_index, style_index;

  template <class U>
  Batch<U> cast() const;
};

struct BatchItem {
  int volume = 0;
  int pose = 0;
  int style = 0;
};

Batch<float> make_batch(const TrainingData& d, const std::vector<BatchItem>& items);
/// Uniform draws of volume, pose and style image, seeded by (seed, step) only.
std::vector<BatchItem> draw_batch(const TrainingData& d, int64_t batch_size, uint64_t seed, int64_t step);

template <class T>
struct GeneratorPass {
  Var<T> f_ct, f_wplus, attention, s_x, s_drr, fake_x, fake_drr;
  Var<T> rec, cc, sc, consis, zero, adv_g, total;
};

/// Steps (1)-(4) of a training step plus the generator-side losses.
template <class T>
GeneratorPass<T> generator_pass(nets::Model<T>& model, const nets::PerceptualExtractor<T>& perceptual,
                                const Batch<T>& batch, const obj::LossWeights& w, nets::Mode mode);

template <class T>
struct DiscriminatorPass {
  Var<T> scores_fake, scores_real, r1, adv_d, total;
};

/// Discriminator-side losses on detached fakes.
template <class T>
DiscriminatorPass<T> discriminator_pass(const nets::Model<T>& model, const Tensor<T>& fake_x, const Batch<T>& batch,
                                        const obj::LossWeights& w, const obj::R1Options& r1);

obj::R1Mode resolve_r1_mode(const std::string& setting);

class Trainer {
 public:
  /// `out_dir` may be empty, in which case nothing is written.
  Trainer(Config config, const vol::DatasetManifest& manifest, std::filesystem::path out_dir);

  /// Loads parameters, optimiser state and the step counter. Refuses a
  /// checkpoint written under a different configuration hash.
  void resume(const std::filesystem::path& checkpoint_dir);

  /// One alternating G/D update on the batch for the current step.
  obj::LossReport step();

  /// Steps until `until_step`, logging, checkpointing and previewing per the
  /// configured cadences. Returns the reports of the steps it ran.
  std::vector<obj::LossReport> run(int64_t until_step);

  std::filesystem::path save_checkpoint(const std::filesystem::path& dir);
  std::filesystem::path checkpoint_dir_for(int64_t step) const;

  int64_t current_step() const { return step_; }
  nets::Model<float>& model() { return *model_; }
  const TrainingData& data() const { return data_; }
  const Config& config() const { return config_; }

 private:
  void write_preview(int64_t step) const;
  void truncate_log(int64_t from_step) const;

  Config config_;
  nlohmann::json dataset_meta_;
  std::filesystem::path out_dir_;
  TrainingData data_;
  std::unique_ptr<nets::Model<float>> model_;
  nets::PerceptualExtractor<float> perceptual_;
  std::unique_ptr<Adam> adam_g_, adam_d_;
  obj::R1Mode r1_mode_;
  int64_t step_ = 0;
};

/// Checkpoint metadata written beside the parameters.
struct CheckpointInfo {
  int64_t step = 0;
  std::string config_hash;
  Config config;
  double mu_norm = 1.0;
  double norm_scale = 1.0;
  geom::ProjectionConfig projection;
};

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);
/// Loads a checkpoint's networks (optimiser entries are ignored).
std::unique_ptr<nets::Model<float>> load_model(const std::filesystem::path& dir, CheckpointInfo* info = nullptr);

/// Appends one JSON line.
void append_jsonl(const std::filesystem::path& file, const nlohmann::json& j);
std::vector<obj::LossReport> read_log(const std::filesystem::path& file);

}  // namespace xrs::train
