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

#include <cmath>
#include <fstream>
#include <random>

#include "../support.hpp"
#include "xraysynth/objectives/losses.hpp"
#include "xraysynth/train/adam.hpp"
#include "xraysynth/train/config.hpp"
#include "xraysynth/train/trainer.hpp"

using namespace xrs;
using ad::Shape;
using ad::Tensor;
using V = ad::Var<double>;
namespace fs = std::filesystem;

namespace {

nets::ModelConfig micro_model() { return testing::micro_config().model; }

V rand_var(Shape s, std::mt19937_64& rng, double lo = 0, double hi = 1) {
  return V::constant(testing::random_tensor(std::move(s), rng, lo, hi));
}

// Linear critic: score_b = <w, x_b>.
std::function<V(const V&)> linear_critic(const Tensor<double>& w) {
  return [w](const V& x) {
    const int64_t b = x.shape()[0], n = w.size();
    return ad::matmul(ad::reshape(x, Shape{b, n}), V::constant(w.reshaped({n, 1})));
  };
}

double sq_norm(const Tensor<double>& w) {
  double s = 0;
  for (int64_t i = 0; i < w.size(); ++i) s += w[i] * w[i];
  return s;
}

/// Shared on-disk micro dataset for the trainer tests.
const vol::DatasetManifest& micro_manifest() {
  static testing::TempDir dir("trainer_ds");
  static const vol::DatasetManifest m = vol::build_dataset(testing::micro_config().dataset, dir.path());
  return m;
}

train::Config trainer_config() {
  auto c = testing::micro_config();
  c.train.checkpoint_every = 2;
  c.train.preview_every = 3;
  return c;
}

bool same_report(const obj::LossReport& a, const obj::LossReport& b) { return a.to_json() == b.to_json(); }

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("each loss is exactly zero on its identity input") {
    const nets::Model<double> m(micro_model(), 1);
    const nets::PerceptualExtractor<double> p;
    std::mt19937_64 rng(1);
    const auto x = rand_var({2, 1, 16, 16}, rng), y = rand_var({2, 1, 16, 16}, rng);
    CHECK(obj::rec_loss(x, x, obj::LossWeights{}, p).item() == 0.0);
    CHECK(obj::consistency_terms(m, x, x, y, y).cc.item() == 0.0);
    CHECK(obj::consistency_terms(m, x, y, x, y).sc.item() == 0.0);
    // Untrained style branches map a blank image to the zero code.
    const auto blank = V::constant(Tensor<double>({2, 1, 16, 16}, 0.0));
    CHECK(obj::zero_loss(m, blank, blank).item() == 0.0);
    CHECK(obj::zero_loss_from_codes(V::constant(Tensor<double>({2, 4}, 0.0)), V::constant(Tensor<double>({2, 4}, 0.0)))
              .item() == 0.0);
  }

  TEST_CASE("losses are non-negative on random inputs") {
    const nets::Model<double> m(micro_model(), 2);
    const nets::PerceptualExtractor<double> p;
    std::mt19937_64 rng(2);
    for (int t = 0; t < 25; ++t) {
      const auto a = rand_var({2, 1, 16, 16}, rng), b = rand_var({2, 1, 16, 16}, rng);
      const auto c = rand_var({2, 1, 16, 16}, rng), d = rand_var({2, 1, 16, 16}, rng);
      CHECK(obj::rec_loss(a, b, obj::LossWeights{}, p).item() >= 0.0);
      const auto ct = obj::consistency_terms(m, a, b, c, d);
      CHECK(ct.cc.item() >= 0.0);
      CHECK(ct.sc.item() >= 0.0);
      CHECK(obj::zero_loss(m, a, b).item() >= 0.0);
    }
  }

  TEST_CASE("mean row norms have the documented batch averaging") {
    const auto a = V::constant(Tensor<double>({2, 2}, {3, 4, 0, 0}));
    const auto z = V::constant(Tensor<double>({2, 2}, 0.0));
    CHECK(obj::mean_row_l2(a, z).item() == doctest::Approx(2.5));
    CHECK(obj::mean_row_l1(a).item() == doctest::Approx(3.5));
    CHECK_THROWS_AS(obj::mean_row_l2(a, V::constant(Tensor<double>({1, 2}, 0.0))), ContractError);
  }

  TEST_CASE("adversarial terms follow the hinge-free Wasserstein form") {
    const auto f = V::constant(Tensor<double>({2, 1}, {1.0, 3.0}));
    const auto r = V::constant(Tensor<double>({2, 1}, {0.5, 0.5}));
    const auto r1 = V::constant(Tensor<double>::scalar(0.2));
    obj::LossWeights w;
    CHECK(obj::adv_gen_loss(f).item() == doctest::Approx(-2.0));
    CHECK(obj::adv_dis_loss(f, r, r1, w).item() == doctest::Approx(2.0 - 0.5 + 10 * 0.2));
    CHECK(obj::total_dis(obj::adv_dis_loss(f, r, r1, w), w).item() == doctest::Approx(0.1 * 3.5));
    const auto bad = V::constant(Tensor<double>({1, 1}, std::nan("")));
    CHECK_THROWS_AS(obj::adv_gen_loss(bad), ad::NonFiniteError);
  }

  TEST_CASE("R1 of a linear critic is |w|^2 in both modes; sparse directions are unbiased") {
    std::mt19937_64 rng(3);
    const auto w = testing::random_tensor({1, 1, 4, 4}, rng, -1, 1);
    const auto x = testing::random_tensor({3, 1, 4, 4}, rng);
    obj::R1Options exact;
    CHECK(obj::r1_penalty<double>(linear_critic(w), x, exact).item() == doctest::Approx(sq_norm(w)).epsilon(1e-12));
    obj::R1Options fd;
    fd.mode = obj::R1Mode::kFiniteDifference;
    CHECK(obj::r1_penalty<double>(linear_critic(w), x, fd).item() == doctest::Approx(sq_norm(w)).epsilon(1e-8));
    double mean = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
      fd.directions = 4;
      fd.seed = static_cast<uint64_t>(t);
      mean += obj::r1_penalty<double>(linear_critic(w), x, fd).item() / trials;
    }
    CHECK(mean == doctest::Approx(sq_norm(w)).epsilon(0.05));
  }

  TEST_CASE("exact R1 refuses to run without double backward") {
    std::mt19937_64 rng(4);
    const auto w = testing::random_tensor({1, 4}, rng);
    ad::set_max_derivative_order(1);
    CHECK_THROWS_AS(obj::r1_penalty<double>(linear_critic(w), testing::random_tensor({2, 4}, rng), {}), ContractError);
    CHECK(train::resolve_r1_mode("auto") == obj::R1Mode::kFiniteDifference);
    ad::set_max_derivative_order(2);
    CHECK(train::resolve_r1_mode("auto") == obj::R1Mode::kExact);
  }

  TEST_CASE("loss weights and reports") {
    obj::LossWeights w;
    w.cc = -1;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    obj::LossReport r;
    r.step = 4;
    r.l_rec = 0.5;
    r.total_d = -0.25;
    CHECK(same_report(obj::LossReport::from_json(r.to_json()), r));
  }
}

TEST_SUITE("config") {
  TEST_CASE("unknown keys are listed as dotted paths") {
    testing::TempDir dir("cfg");
    std::ofstream(dir.path() / "c.json") << R"({"train": {"lr": 0.001, "lrr": 1}, "modle": {}})";
    try {
      train::load_config(dir.path() / "c.json", {});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("train.lrr") != std::string::npos);
      CHECK(msg.find("modle") != std::string::npos);
    }
    CHECK_THROWS_AS(train::load_config({}, {"dataset.projection.pich=2"}), ConfigError);
  }

  TEST_CASE("overrides parse as JSON and fall back to strings") {
    const auto c = train::load_config({}, {"train.lr=0.01", "train.r1_mode=fd", "dataset.horiz_deg=[0,45]"});
    CHECK(c.train.lr == 0.01);
    CHECK(c.train.r1_mode == "fd");
    CHECK(c.dataset.horiz_deg == std::vector<double>{0, 45});
    CHECK_THROWS_AS(train::load_config({}, {"train.lr"}), ConfigError);
    CHECK_THROWS_AS(train::load_config({}, {"train.lr=-1"}), ConfigError);
  }

  TEST_CASE("the hash ignores step budget and cadence but not the optimisation") {
    train::Config a, b;
    b.train.steps = 2000;
    b.train.checkpoint_every = 7;
    b.dataset_dir = "/elsewhere";
    CHECK(a.hash() == b.hash());
    b.train.lr = 0.001;
    CHECK(a.hash() != b.hash());
    CHECK(train::Config::from_json(a.to_json()).hash() == a.hash());
  }

  TEST_CASE("model and dataset geometry must agree") {
    train::Config c;
    c.model.image_size = 64;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(testing::micro_config().validate());
    train::Config e;
    e.train.epochs = 3;
    CHECK(e.total_steps(8) == 6);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("first step with beta1 = 0 moves each weight by lr against its gradient sign") {
    ad::ParamStore<float> s(1);
    s.create("w", {3}, ad::InitSpec::constant(1.0));
    train::Adam opt(s, {"w"}, {0.1, 0.0, 0.99, 1e-8});
    CHECK(s.contains("opt.m.w"));
    CHECK_FALSE(s.trainable("opt.v.w"));
    opt.step({ad::Var<float>::constant(Tensor<float>({3}, {2.0f, -0.5f, 0.0f}))}, 1);
    CHECK(s.get("w").value()[0] == doctest::Approx(0.9));
    CHECK(s.get("w").value()[1] == doctest::Approx(1.1));
    CHECK(s.get("w").value()[2] == doctest::Approx(1.0));
  }
}

TEST_SUITE("trainer") {
  TEST_CASE("two fresh runs agree bit for bit") {
    const auto& m = micro_manifest();
    train::Trainer a(trainer_config(), m, {}), b(trainer_config(), m, {});
    for (int i = 0; i < 3; ++i) CHECK(same_report(a.step(), b.step()));
    CHECK(a.model().store().fingerprint() == b.model().store().fingerprint());
  }

  TEST_CASE("batches depend only on (seed, step)") {
    const auto d = train::TrainingData::load(micro_manifest(), "train");
    const auto x = train::draw_batch(d, 4, 1, 5), y = train::draw_batch(d, 4, 1, 5), z = train::draw_batch(d, 4, 1, 6);
    for (size_t i = 0; i < x.size(); ++i) {
      CHECK(x[i].volume == y[i].volume);
      CHECK(x[i].style == y[i].style);
    }
    bool differs = false;
    for (size_t i = 0; i < x.size(); ++i) differs = differs || x[i].pose != z[i].pose || x[i].volume != z[i].volume || x[i].style != z[i].style;
    CHECK(differs);
  }

  TEST_CASE("each half-step leaves the other side's parameters untouched") {
    const auto cfg = trainer_config();
    const auto data = train::TrainingData::load(micro_manifest(), "train");
    nets::Model<float> m(cfg.model, 3);
    const nets::PerceptualExtractor<float> p;
    train::Adam g_opt(m.store(), m.generator_parameter_names(), {});
    train::Adam d_opt(m.store(), m.discriminator_parameter_names(), {});
    auto gen_hash = [&] {
      std::string h;
      for (const char* prefix : {"e_ct.", "e_sty.", "pam.", "g."}) h += std::to_string(m.store().fingerprint(prefix)) + ",";
      return h;
    };
    const auto batch = train::make_batch(data, train::draw_batch(data, 2, 0, 0));
    auto gp = train::generator_pass(m, p, batch, cfg.loss, nets::Mode::kTrain);
    const auto d_before = m.store().fingerprint("d.");
    const auto g_before = gen_hash();
    g_opt.step(ad::grad(gp.total, m.generator_parameters()), 1);
    CHECK(m.store().fingerprint("d.") == d_before);
    CHECK(gen_hash() != g_before);

    const auto g_mid = gen_hash();
    auto dp = train::discriminator_pass(m, gp.fake_x.value(), batch, cfg.loss, obj::R1Options{});
    d_opt.step(ad::grad(dp.total, m.discriminator_parameters()), 1);
    CHECK(gen_hash() == g_mid);
    CHECK(m.store().fingerprint("d.") != d_before);
  }

  TEST_CASE("checkpoints, previews and resume reproduce the uninterrupted log") {
    testing::TempDir dir("trainer_run");
    const auto& m = micro_manifest();
    train::Trainer full(trainer_config(), m, dir.path() / "full");
    full.run(4);
    for (int s : {0, 2, 4}) CHECK(fs::exists(full.checkpoint_dir_for(s) / "manifest.json"));
    CHECK_FALSE(fs::exists(full.checkpoint_dir_for(1)));
    CHECK(fs::exists(dir.path() / "full" / "previews" / "step_000003.pgm"));

    train::Trainer part(trainer_config(), m, dir.path() / "part");
    part.run(2);
    train::Trainer resumed(trainer_config(), m, dir.path() / "part");
    resumed.resume(part.checkpoint_dir_for(2));
    CHECK(resumed.current_step() == 2);
    resumed.run(4);
    const auto a = train::read_log(dir.path() / "full" / "train_log.jsonl");
    const auto b = train::read_log(dir.path() / "part" / "train_log.jsonl");
    REQUIRE(a.size() == 4);
    REQUIRE(b.size() == 4);
    for (size_t i = 0; i < a.size(); ++i) CHECK(same_report(a[i], b[i]));
    CHECK(resumed.model().store().fingerprint() == full.model().store().fingerprint());

    // Resuming an earlier checkpoint drops the log lines it will rewrite.
    train::Trainer again(trainer_config(), m, dir.path() / "part");
    again.resume(part.checkpoint_dir_for(2));
    CHECK(train::read_log(dir.path() / "part" / "train_log.jsonl").size() == 2);
  }

  TEST_CASE("resume under a different configuration is refused") {
    testing::TempDir dir("trainer_hash");
    const auto& m = micro_manifest();
    train::Trainer t(trainer_config(), m, dir.path());
    t.run(1);
    auto other = trainer_config();
    other.loss.adv = 0.5;
    train::Trainer u(other, m, dir.path() / "other");
    CHECK_THROWS_AS(u.resume(t.checkpoint_dir_for(1)), ConfigError);
    auto more_steps = trainer_config();
    more_steps.train.steps = 99;
    train::Trainer v(more_steps, m, dir.path() / "more");
    CHECK_NOTHROW(v.resume(t.checkpoint_dir_for(1)));
  }

  TEST_CASE("a non-finite loss writes an abort checkpoint and stops") {
    testing::TempDir dir("trainer_nan");
    train::Trainer t(trainer_config(), micro_manifest(), dir.path());
    auto w = t.model().store().get("g.out.b");
    w.mutable_value()[0] = std::nanf("");
    CHECK_THROWS_AS(t.step(), ad::NonFiniteError);
    CHECK(fs::exists(dir.path() / "checkpoints" / "abort_step_000000" / "manifest.json"));
    CHECK(t.current_step() == 0);
  }

  TEST_CASE("checkpoint metadata carries the dataset normalisation") {
    testing::TempDir dir("trainer_meta");
    train::Trainer t(trainer_config(), micro_manifest(), dir.path());
    t.run(1);
    train::CheckpointInfo info;
    auto model = train::load_model(t.checkpoint_dir_for(1), &info);
    CHECK(info.step == 1);
    CHECK(info.mu_norm == micro_manifest().mu_norm);
    CHECK(info.norm_scale == micro_manifest().norm_scale);
    CHECK(info.config_hash == trainer_config().hash_hex());
    CHECK(model->store().fingerprint("g.") == t.model().store().fingerprint("g."));
  }
}
