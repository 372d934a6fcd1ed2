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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "../support.hpp"
#include "xraysynth/cli/commands.hpp"
#include "xraysynth/volume/volume.hpp"

using namespace xrs;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "xraysynth");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Micro scale with enough images for the distribution metrics (>= 16 per set).
fs::path write_cli_config(const fs::path& dir) {
  auto c = testing::micro_config();
  c.dataset.n_train = 3;
  c.dataset.n_style = 4;
  c.train.steps = 2;
  c.train.checkpoint_every = 1;
  c.train.preview_every = 0;
  const fs::path file = dir / "micro.json";
  std::ofstream(file) << c.to_json().dump(2);
  return file;
}

}  // namespace

TEST_CASE("config errors exit with code 2") {
  testing::TempDir tmp("cli_cfg");
  const auto cfg = write_cli_config(tmp.path());
  CHECK(run_cli({"dataset", "--config", cfg.string(), "--out", (tmp.path() / "d").string(), "--set",
                 "dataset.no_such_key=1"}) == cli::kExitConfig);
  CHECK(run_cli({"dataset", "--config", (tmp.path() / "missing.json").string(), "--out",
                 (tmp.path() / "d").string()}) == cli::kExitConfig);
  CHECK(run_cli({"frobnicate"}) == cli::kExitConfig);
  CHECK(run_cli({"synth", "--out", (tmp.path() / "s").string()}) == cli::kExitConfig);
}

TEST_CASE("dataset command is reproducible byte for byte") {
  testing::TempDir tmp("cli_ds");
  const auto cfg = write_cli_config(tmp.path());
  const auto a = tmp.path() / "a", b = tmp.path() / "b";
  REQUIRE(run_cli({"dataset", "--config", cfg.string(), "--out", a.string(), "--seed", "5"}) == cli::kExitOk);
  REQUIRE(run_cli({"dataset", "--config", cfg.string(), "--out", b.string(), "--seed", "5"}) == cli::kExitOk);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  const auto m = vol::DatasetManifest::load(a / "manifest.json");
  REQUIRE(!m.style_images.empty());
  CHECK(slurp(a / (m.style_images.front().path + ".f32")) == slurp(b / (m.style_images.front().path + ".f32")));
  CHECK(fs::exists(a / "resolved_config.json"));
  const auto resolved = json::parse(slurp(a / "resolved_config.json"));
  CHECK(resolved["config"]["dataset"]["seed"].get<uint64_t>() == 5);
}

TEST_CASE("render command places a one-hot voxel where the pinhole model says") {
  testing::TempDir tmp("cli_render");
  const auto cfg = write_cli_config(tmp.path());
  vol::Volume v({16, 16, 16}, {1.0, 1.0, 1.0});
  v.at(4, 11, 9) = 1.0f;
  vol::save_volume(v, tmp.path() / "onehot");
  const auto out = tmp.path() / "r";
  REQUIRE(run_cli({"render", "--config", cfg.string(), "--volume", (tmp.path() / "onehot").string(), "--out",
                   out.string()}) == cli::kExitOk);
  const auto img = vol::load_image(out / "path_integral");
  const auto& pc = testing::micro_config().dataset.projection;
  const double f = (pc.sod_mm + pc.sdd_mm) / pc.det_pitch_mm, cc = (pc.det_px - 1) / 2.0;
  const double col = cc + f * 3.5 / (1.5 + pc.sod_mm), row = cc + f * -3.5 / (1.5 + pc.sod_mm);
  int64_t best = 0;
  for (int64_t i = 1; i < img.size(); ++i)
    if (img.pixels[static_cast<size_t>(i)] > img.pixels[static_cast<size_t>(best)]) best = i;
  CHECK(best / img.width == std::lround(row));
  CHECK(best % img.width == std::lround(col));
  CHECK(fs::exists(out / "drr.pgm"));
  CHECK(fs::exists(out / "mip.pgm"));
  CHECK(fs::exists(out / "resolved_config.json"));
}

TEST_CASE("train, synth and eval run end to end at micro scale") {
  testing::TempDir tmp("cli_e2e");
  const auto cfg = write_cli_config(tmp.path());
  const auto ds = tmp.path() / "ds", run = tmp.path() / "run";
  REQUIRE(run_cli({"dataset", "--config", cfg.string(), "--out", ds.string()}) == cli::kExitOk);
  REQUIRE(run_cli({"train", "--config", cfg.string(), "--dataset", ds.string(), "--out", run.string()}) ==
          cli::kExitOk);
  const auto ckpt = run / "checkpoints" / "step_000002";
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(run / "checkpoints" / "step_000000"));
  CHECK(fs::exists(run / "resolved_config.json"));

  const auto m = vol::DatasetManifest::load(ds / "manifest.json");
  const auto volume = ds / m.val.front().path;
  const auto synth = tmp.path() / "synth";
  REQUIRE(run_cli({"synth", "--checkpoint", ckpt.string(), "--volume", volume.string(), "--angles", "-30,0,30",
                   "--style", (ds / m.style_images.front().path).string(), "--out", synth.string()}) == cli::kExitOk);
  CHECK(fs::exists(synth / "synth_grid.pgm"));
  CHECK(fs::exists(synth / "resolved_config.json"));
  CHECK(run_cli({"synth", "--checkpoint", ckpt.string(), "--volume", volume.string(), "--style-domain", "ct",
                 "--out", synth.string()}) == cli::kExitConfig);

  const auto ev = tmp.path() / "eval";
  REQUIRE(run_cli({"eval", "--checkpoint", ckpt.string(), "--dataset", ds.string(), "--out", ev.string()}) ==
          cli::kExitOk);
  const auto metrics = json::parse(slurp(ev / "metrics.json"));
  CHECK(metrics.contains("checkpoint_step"));
  CHECK(fs::exists(ev / "resolved_config.json"));
  CHECK(run_cli({"eval", "--checkpoint", ckpt.string(), "--dataset", ds.string(), "--out", ev.string(), "--set",
                 "train.lr=1"}) == cli::kExitConfig);
}
