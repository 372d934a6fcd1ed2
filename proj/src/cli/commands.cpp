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


#include "xraysynth/cli/commands.hpp"

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "xraysynth/eval/multiview.hpp"
#include "xraysynth/geometry/render.hpp"
#include "xraysynth/train/config.hpp"
#include "xraysynth/train/trainer.hpp"

namespace xrs::cli {

using nlohmann::json;

namespace {

void write_json(const fs::path& file, const json& j) {
  fs::create_directories(file.parent_path().empty() ? fs::path(".") : file.parent_path());
  std::ofstream os(file);
  if (!os) throw FormatError("cannot write " + file.string());
  os << j.dump(2) << "\n";
}

void require_out(const fs::path& out) {
  if (out.empty()) throw ConfigError("--out is required");
  fs::create_directories(out);
}

train::Config resolve(const CommonOptions& o, const char* seed_key) {
  auto sets = o.sets;
  if (o.seed) sets.push_back(std::string(seed_key) + "=" + std::to_string(*o.seed));
  return train::load_config(o.config, sets);
}

vol::DatasetManifest load_manifest(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("no dataset directory (set dataset_dir or pass --dataset)");
  return vol::DatasetManifest::load(dir / "manifest.json");
}

std::string abs_str(const fs::path& p) { return p.empty() ? std::string() : fs::absolute(p).string(); }

nets::Domain domain_from(const std::string& s) {
  try {
    return nets::parse_domain(s);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

std::vector<double> trained_angles(const vol::DatasetManifest& m) {
  std::vector<double> a;
  for (const auto& p : m.poses) a.push_back(p.horiz_deg);
  return a;
}

}  // namespace

int cmd_dataset(const CommonOptions& o) {
  const train::Config c = resolve(o, "dataset.seed");
  require_out(o.out);
  const auto m = vol::build_dataset(c.dataset, o.out);
  write_json(o.out / "resolved_config.json", {{"command", "dataset"}, {"config", c.to_json()}});
  std::cerr << "dataset: " << m.train.size() << " train, " << m.val.size() << " val volumes, "
            << m.style_images.size() << " X-ray-domain images -> " << o.out.string() << "\n";
  return kExitOk;
}

int cmd_train(const TrainOptions& o) {
  auto sets = o.sets;
  if (!o.dataset.empty()) sets.push_back("dataset_dir=\"" + abs_str(o.dataset) + "\"");
  CommonOptions co = o;
  co.sets = sets;
  const train::Config c = resolve(co, "seed");
  require_out(o.out);
  const auto manifest = load_manifest(c.dataset_dir);
  write_json(o.out / "resolved_config.json",
             {{"command", "train"}, {"resume", abs_str(o.resume)}, {"config", c.to_json()}});
  train::Trainer trainer(c, manifest, o.out);
  if (!o.resume.empty()) trainer.resume(o.resume);
  const int64_t total = c.total_steps(static_cast<int64_t>(manifest.train.size()));
  trainer.run(total);
  std::cerr << "train: finished at step " << trainer.current_step() << "\n";
  return kExitOk;
}

int cmd_synth(const SynthOptions& o) {
  if (o.checkpoint.empty() || o.volume.empty()) throw ConfigError("synth needs --checkpoint and --volume");
  if (o.angles.empty()) throw ConfigError("synth needs at least one angle");
  require_out(o.out);
  train::CheckpointInfo info;
  auto model = train::load_model(o.checkpoint, &info);
  const eval::Synthesizer syn{model.get(), info.mu_norm, info.norm_scale, info.projection};
  const auto volume = vol::load_volume(o.volume);
  const nets::Domain domain = domain_from(o.style_domain);
  std::optional<vol::ImagePlane> style;
  if (!o.style.empty()) style = vol::load_image(o.style);

  write_json(o.out / "resolved_config.json", {{"command", "synth"},
                                              {"checkpoint", abs_str(o.checkpoint)},
                                              {"volume", abs_str(o.volume)},
                                              {"angles", o.angles},
                                              {"style", abs_str(o.style)},
                                              {"style_domain", o.style_domain},
                                              {"config", info.config.to_json()}});
  std::vector<vol::ImagePlane> row;
  for (const double a : o.angles) {
    const auto pose = geom::pose_from_angles(a, 0.0, info.projection);
    // Without a style image the ground-truth DRR drives the DRR branch.
    const auto img = style ? syn.synthesize(volume, pose, *style, domain)
                           : syn.synthesize(volume, pose, syn.render(volume, pose), nets::Domain::kDrr);
    char name[64];
    std::snprintf(name, sizeof name, "synth_%+04d", static_cast<int>(std::lround(a)));
    vol::save_image(img, o.out / name);
    vol::write_pgm16(img, o.out / (std::string(name) + ".pgm"));
    row.push_back(img);
  }
  vol::write_pgm16(vol::tile_horizontal(row), o.out / "synth_grid.pgm");
  return kExitOk;
}

int cmd_eval(const EvalOptions& o) {
  if (o.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  require_out(o.out);
  train::CheckpointInfo info;
  auto model = train::load_model(o.checkpoint, &info);

  json patch = json::object();
  for (const auto& s : o.sets) {
    if (s.rfind("eval.", 0) != 0) throw ConfigError("eval accepts only eval.* overrides, got " + s);
    train::apply_override(patch, s);
  }
  const auto bad = train::unknown_keys(patch, train::Config().to_json());
  if (!bad.empty()) throw ConfigError("unknown config key " + bad.front());
  json merged = info.config.to_json();
  merged.merge_patch(patch);
  const train::Config c = train::Config::from_json(merged);
  c.validate();

  const fs::path dataset_dir = o.dataset.empty() ? fs::path(c.dataset_dir) : o.dataset;
  const auto manifest = load_manifest(dataset_dir);
  write_json(o.out / "resolved_config.json", {{"command", "eval"},
                                              {"checkpoint", abs_str(o.checkpoint)},
                                              {"dataset", abs_str(dataset_dir)},
                                              {"config", c.to_json()}});

  const eval::Synthesizer syn{model.get(), manifest.mu_norm, manifest.norm_scale, manifest.projection};
  const nets::PerceptualExtractor<double> net(c.eval.extractor_seed);
  eval::MetricReport report;
  report.extractor_seed = c.eval.extractor_seed;
  report.kid_degree = c.eval.kid_degree;

  std::vector<vol::ImagePlane> xray_set;
  for (const auto& s : manifest.style_images) xray_set.push_back(vol::load_image(manifest.resolve(s.path)));

  // Multi-view sweep over the validation split.
  const auto trained = trained_angles(manifest);
  json views = json::array();
  double psnr_sum = 0, ssim_sum = 0;
  for (size_t i = 0; i < manifest.val.size(); ++i) {
    const auto& e = manifest.val[i];
    const auto volume = vol::load_volume(manifest.resolve(e.path));
    const auto mv = eval::multiview_report(syn, volume, c.eval.angles, trained, &xray_set[i % xray_set.size()]);
    vol::write_pgm16(mv.grid(), o.out / ("multiview_" + e.id + ".pgm"));
    for (const auto& w : mv.warnings) std::cerr << "eval: " << e.id << ": " << w << "\n";
    json v = mv.to_json();
    v["volume_id"] = e.id;
    views.push_back(v);
    psnr_sum += mv.mean_psnr_trained;
    ssim_sum += mv.mean_ssim_trained;
  }
  const auto nval = static_cast<int64_t>(manifest.val.size());
  if (nval > 0) {
    report.set("psnr_recon", psnr_sum / static_cast<double>(nval), nval);
    report.set("ssim_recon", ssim_sum / static_cast<double>(nval), nval);
  }

  // Distribution metrics over every content volume at every training pose.
  std::vector<vol::ImagePlane> synth_x, drrs;
  std::vector<const vol::VolumeEntry*> entries;
  for (const auto& e : manifest.train) entries.push_back(&e);
  for (const auto& e : manifest.val) entries.push_back(&e);
  size_t k = 0;
  for (const auto* e : entries) {
    const auto volume = vol::load_volume(manifest.resolve(e->path));
    for (int p = 0; p < static_cast<int>(manifest.poses.size()); ++p) {
      drrs.push_back(vol::load_image(manifest.resolve(manifest.drr(e->id, p).path)));
      synth_x.push_back(syn.synthesize(volume, manifest.poses[static_cast<size_t>(p)],
                                       xray_set[k++ % xray_set.size()], nets::Domain::kXray));
    }
  }
  eval::add_distribution_metrics(report, "synth_xray", net, synth_x, xray_set);
  eval::add_distribution_metrics(report, "drr_xray", net, drrs, xray_set);
  for (const auto& n : report.notes) std::cerr << "eval: " << n << "\n";

  json out = report.to_json();
  out["multiview"] = views;
  out["checkpoint_step"] = info.step;
  write_json(o.out / "metrics.json", out);
  std::cerr << "eval: " << out["metrics"].dump() << "\n";
  return kExitOk;
}

int cmd_render(const RenderOptions& o) {
  if (o.volume.empty()) throw ConfigError("render needs --volume");
  const train::Config c = resolve(o, "seed");
  require_out(o.out);
  const auto volume = vol::load_volume(o.volume);
  const auto& proj = c.dataset.projection;
  const auto pose = geom::pose_from_angles(o.angle, o.vert, proj);
  write_json(o.out / "resolved_config.json", {{"command", "render"},
                                              {"volume", abs_str(o.volume)},
                                              {"angle", o.angle},
                                              {"vert", o.vert},
                                              {"config", c.to_json()}});
  const auto path = geom::render_path_integral(volume, pose, proj);
  vol::save_image(path, o.out / "path_integral");
  float peak = 0.0f;
  for (float v : path.pixels) peak = std::max(peak, v);
  vol::ImagePlane shown = path;
  if (peak > 0.0f)
    for (auto& v : shown.pixels) v /= peak;
  vol::write_pgm16(shown, o.out / "drr.pgm");
  auto mip = geom::max_intensity_projection(geom::rotate_volume(volume, pose));
  vol::save_image(mip, o.out / "mip");
  const float mip_peak = std::max(mip.pixels.empty() ? 0.0f : *std::max_element(mip.pixels.begin(), mip.pixels.end()),
                                  1e-12f);
  for (auto& v : mip.pixels) v /= mip_peak;
  vol::write_pgm16(mip, o.out / "mip.pgm");
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"xraysynth: CT-to-X-ray synthesis pipeline"};
  app.require_subcommand(1);

  CommonOptions dataset_o;
  TrainOptions train_o;
  SynthOptions synth_o;
  EvalOptions eval_o;
  RenderOptions render_o;
  std::optional<uint64_t> seed_d, seed_t, seed_r;

  auto common = [](CLI::App* sc, CommonOptions& o, std::optional<uint64_t>& seed) {
    sc->add_option("--config", o.config, "JSON config file");
    sc->add_option("--seed", seed, "seed override");
    sc->add_option("--out", o.out, "output directory")->required();
    sc->add_option("--set", o.sets, "dotted key=value override (repeatable)");
  };

  auto* d = app.add_subcommand("dataset", "build phantoms, DRRs and the pseudo-X-ray domain");
  common(d, dataset_o, seed_d);
  auto* t = app.add_subcommand("train", "train (or resume) a model");
  common(t, train_o, seed_t);
  t->add_option("--dataset", train_o.dataset, "dataset directory (overrides dataset_dir)");
  t->add_option("--resume", train_o.resume, "checkpoint directory to resume from");
  auto* s = app.add_subcommand("synth", "multi-view synthesis from a checkpoint");
  s->add_option("--checkpoint", synth_o.checkpoint)->required();
  s->add_option("--volume", synth_o.volume, "raw volume base path")->required();
  s->add_option("--angles", synth_o.angles, "horizontal angles in degrees")->delimiter(',');
  s->add_option("--style", synth_o.style, "style image base path");
  s->add_option("--style-domain", synth_o.style_domain, "xray or drr");
  s->add_option("--out", synth_o.out)->required();
  auto* e = app.add_subcommand("eval", "metrics and multi-view report for a checkpoint");
  e->add_option("--checkpoint", eval_o.checkpoint)->required();
  e->add_option("--dataset", eval_o.dataset, "dataset directory");
  e->add_option("--set", eval_o.sets, "eval.* override (repeatable)");
  e->add_option("--out", eval_o.out)->required();
  auto* r = app.add_subcommand("render", "DRR and MIP of a volume at one pose");
  common(r, render_o, seed_r);
  r->add_option("--volume", render_o.volume, "raw volume base path")->required();
  r->add_option("--angle", render_o.angle, "horizontal angle in degrees");
  r->add_option("--vert", render_o.vert, "vertical angle in degrees");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (d->parsed()) {
      dataset_o.seed = seed_d;
      return cmd_dataset(dataset_o);
    }
    if (t->parsed()) {
      train_o.seed = seed_t;
      return cmd_train(train_o);
    }
    if (s->parsed()) return cmd_synth(synth_o);
    if (e->parsed()) return cmd_eval(eval_o);
    if (r->parsed()) {
      render_o.seed = seed_r;
      return cmd_render(render_o);
    }
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace xrs::cli
