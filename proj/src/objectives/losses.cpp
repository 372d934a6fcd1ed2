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


#include "xraysynth/objectives/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace xrs::obj {

using nlohmann::json;

void LossWeights::validate() const {
  for (double v : {mae, lpips, cc, sc, zero, adv, r1})
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
}

json LossWeights::to_json() const {
  return json{{"mae", mae}, {"lpips", lpips}, {"cc", cc}, {"sc", sc}, {"zero", zero}, {"adv", adv}, {"r1", r1}};
}

json LossReport::to_json() const {
  return json{{"step", step},       {"l_rec", l_rec}, {"l_cc", l_cc}, {"l_sc", l_sc},         {"l_0", l_0},
              {"l_adv_g", l_adv_g}, {"l_adv_d", l_adv_d}, {"r1", r1}, {"total_g", total_g}, {"total_d", total_d}};
}

LossReport LossReport::from_json(const json& j) {
  LossReport r;
  r.step = j.at("step").get<int64_t>();
  r.l_rec = j.at("l_rec").get<double>();
  r.l_cc = j.at("l_cc").get<double>();
  r.l_sc = j.at("l_sc").get<double>();
  r.l_0 = j.at("l_0").get<double>();
  r.l_adv_g = j.at("l_adv_g").get<double>();
  r.l_adv_d = j.at("l_adv_d").get<double>();
  r.r1 = j.at("r1").get<double>();
  r.total_g = j.at("total_g").get<double>();
  r.total_d = j.at("total_d").get<double>();
  return r;
}

template <class T>
Var<T> mean_abs_error(const Var<T>& a, const Var<T>& b) {
  return ad::mean(ad::abs(ad::sub(a, b)));
}

namespace {

template <class T>
Var<T> rows(const Var<T>& x) {
  return ad::reshape(x, ad::Shape{x.shape()[0], x.size() / x.shape()[0]});
}

template <class T>
Var<T> scaled(const Var<T>& x, double w) {
  return ad::mul_scalar(x, static_cast<T>(w));
}

}  // namespace

template <class T>
Var<T> mean_row_l2(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape())
    throw ContractError("mean_row_l2: shape mismatch " + ad::to_string(a.shape()) + " vs " + ad::to_string(b.shape()));
  auto d = rows(ad::sub(a, b));
  return ad::mean(ad::sqrt(ad::reduce_sum(ad::square(d), 1)));
}

template <class T>
Var<T> mean_row_l1(const Var<T>& a) {
  return ad::mean(ad::reduce_sum(ad::abs(rows(a)), 1));
}

template <class T>
Var<T> rec_loss(const Var<T>& fake, const Var<T>& real, const LossWeights& w,
                const nets::PerceptualExtractor<T>& perceptual) {
  if (fake.shape() != real.shape())
    throw ContractError("rec_loss: shape mismatch " + ad::to_string(fake.shape()) + " vs " +
                        ad::to_string(real.shape()));
  return ad::add(scaled(mean_abs_error(fake, real), w.mae), scaled(perceptual.distance(fake, real), w.lpips));
}

template <class T>
ConsistencyTerms<T> consistency_terms(const nets::Model<T>& m, const Var<T>& fake_x, const Var<T>& fake_drr,
                                      const Var<T>& real_x, const Var<T>& real_drr) {
  using nets::Domain;
  ConsistencyTerms<T> t;
  t.cc = mean_row_l2(m.content(fake_x), m.content(fake_drr));
  t.sc = ad::add(mean_row_l2(m.style(real_x, Domain::kXray), m.style(fake_x, Domain::kXray)),
                 mean_row_l2(m.style(real_drr, Domain::kDrr), m.style(fake_drr, Domain::kDrr)));
  return t;
}

template <class T>
Var<T> consistency_loss(const ConsistencyTerms<T>& t, const LossWeights& w) {
  return ad::add(scaled(t.cc, w.cc), scaled(t.sc, w.sc));
}

template <class T>
Var<T> zero_loss_from_codes(const Var<T>& sx_of_drr, const Var<T>& sdrr_of_x) {
  return ad::add(mean_row_l1(sx_of_drr), mean_row_l1(sdrr_of_x));
}

template <class T>
Var<T> zero_loss(const nets::Model<T>& m, const Var<T>& real_drr, const Var<T>& real_x) {
  return zero_loss_from_codes(m.style(real_drr, nets::Domain::kXray), m.style(real_x, nets::Domain::kDrr));
}

template <class T>
Var<T> adv_gen_loss(const Var<T>& scores_fake) {
  require_finite_scores(scores_fake, "fake scores");
  return ad::neg(ad::mean(scores_fake));
}

template <class T>
Var<T> adv_dis_loss(const Var<T>& scores_fake, const Var<T>& scores_real, const Var<T>& r1, const LossWeights& w) {
  require_finite_scores(scores_fake, "fake scores");
  require_finite_scores(scores_real, "real scores");
  return ad::add(ad::sub(ad::mean(scores_fake), ad::mean(scores_real)), scaled(r1, w.r1));
}

template <class T>
void require_finite_scores(const Var<T>& scores, const char* what) {
  if (!scores.value().all_finite())
    throw ad::NonFiniteError(std::string("discriminator produced a non-finite value in ") + what);
}

template <class T>
Var<T> r1_penalty(const std::function<Var<T>(const Var<T>&)>& critic, const Tensor<T>& real, const R1Options& o) {
  const int64_t b = real.shape()[0];
  const int64_t n = real.size() / b;
  if (o.mode == R1Mode::kExact) {
    if (!ad::double_backward_available())
      throw ContractError("r1_penalty: exact mode needs double backward; use the finite-difference mode");
    auto x = Var<T>::leaf(real, true);
    auto scores = critic(x);
    require_finite_scores(scores, "R1 scores");
    auto g = ad::grad(ad::sum(scores), {x}, true)[0];
    return ad::mul_scalar(ad::sum(ad::square(g)), static_cast<T>(1.0 / static_cast<double>(b)));
  }
  if (!(o.epsilon > 0.0)) throw ContractError("r1_penalty: epsilon must be > 0");
  const int64_t k = o.directions <= 0 ? n : std::min(o.directions, n);
  auto x = Var<T>::constant(real);
  auto base = critic(x);
  require_finite_scores(base, "R1 scores");
  // Per sample: a random signed subset of k coordinate axes.
  std::mt19937_64 rng(o.seed ^ 0x52315231ULL);
  std::vector<std::vector<int64_t>> axes(static_cast<size_t>(b));
  std::vector<std::vector<T>> signs(static_cast<size_t>(b));
  for (int64_t s = 0; s < b; ++s) {
    std::vector<int64_t> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    perm.resize(static_cast<size_t>(k));
    axes[static_cast<size_t>(s)] = perm;
    for (int64_t j = 0; j < k; ++j) signs[static_cast<size_t>(s)].push_back((rng() & 1) ? T(1) : T(-1));
  }
  Var<T> acc;
  const T eps = static_cast<T>(o.epsilon);
  for (int64_t j = 0; j < k; ++j) {
    Tensor<T> shifted = real;
    for (int64_t s = 0; s < b; ++s)
      shifted[s * n + axes[static_cast<size_t>(s)][static_cast<size_t>(j)]] += eps * signs[static_cast<size_t>(s)][static_cast<size_t>(j)];
    auto d = ad::mul_scalar(ad::sub(critic(Var<T>::constant(std::move(shifted))), base), T(1) / eps);
    auto sq = ad::sum(ad::square(d));
    acc = acc.defined() ? ad::add(acc, sq) : sq;
  }
  return ad::mul_scalar(acc, static_cast<T>(static_cast<double>(n) / static_cast<double>(k) / static_cast<double>(b)));
}

template <class T>
Var<T> total_gan(const Var<T>& adv_g, const Var<T>& rec, const Var<T>& consis, const Var<T>& zero,
                 const LossWeights& w) {
  return ad::add(ad::add(scaled(adv_g, w.adv), rec), ad::add(consis, scaled(zero, w.zero)));
}

template <class T>
Var<T> total_dis(const Var<T>& adv_d, const LossWeights& w) {
  return scaled(adv_d, w.adv);
}

#define XRS_INSTANTIATE_LOSSES(T)                                                                               \
  template Var<T> mean_abs_error(const Var<T>&, const Var<T>&);                                                \
  template Var<T> mean_row_l2(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> mean_row_l1(const Var<T>&);                                                                  \
  template Var<T> rec_loss(const Var<T>&, const Var<T>&, const LossWeights&, const nets::PerceptualExtractor<T>&); \
  template ConsistencyTerms<T> consistency_terms(const nets::Model<T>&, const Var<T>&, const Var<T>&,           \
                                                 const Var<T>&, const Var<T>&);                                \
  template Var<T> consistency_loss(const ConsistencyTerms<T>&, const LossWeights&);                            \
  template Var<T> zero_loss(const nets::Model<T>&, const Var<T>&, const Var<T>&);                              \
  template Var<T> zero_loss_from_codes(const Var<T>&, const Var<T>&);                                          \
  template Var<T> adv_gen_loss(const Var<T>&);                                                                 \
  template Var<T> adv_dis_loss(const Var<T>&, const Var<T>&, const Var<T>&, const LossWeights&);               \
  template void require_finite_scores(const Var<T>&, const char*);                                             \
  template Var<T> r1_penalty(const std::function<Var<T>(const Var<T>&)>&, const Tensor<T>&, const R1Options&); \
  template Var<T> total_gan(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&, const LossWeights&);   \
  template Var<T> total_dis(const Var<T>&, const LossWeights&);

XRS_INSTANTIATE_LOSSES(float)
XRS_INSTANTIATE_LOSSES(double)

}  // namespace xrs::obj
