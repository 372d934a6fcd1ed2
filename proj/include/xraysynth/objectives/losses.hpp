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
#include <functional>

#include "json.hpp"
#include "xraysynth/nets/model.hpp"
#include "xraysynth/nets/perceptual.hpp"

namespace xrs::obj {

using ad::Tensor;
using ad::Var;

struct LossWeights {
  double mae = 1.0;
  double lpips = 1.0;
  double cc = 1.0;
  double sc = 1.0;
  double zero = 1.0;
  double adv = 0.1;
  double r1 = 10.0;

  void validate() const;  // ConfigError if any weight is negative or non-finite
  nlohmann::json to_json() const;
};

/// One optimisation step's loss values. l_cc and l_sc are unweighted;
/// l_rec already carries its two internal weights; l_adv_d includes the
/// weighted R1 term, which is also reported alone as r1.
struct LossReport {
  int64_t step = 0;
  double l_rec = 0, l_cc = 0, l_sc = 0, l_0 = 0, l_adv_g = 0, l_adv_d = 0, r1 = 0, total_g = 0, total_d = 0;
  nlohmann::json to_json() const;
  static LossReport from_json(const nlohmann::json& j);
};

/// mean |a - b|.
template <class T>
Var<T> mean_abs_error(const Var<T>& a, const Var<T>& b);

/// Batch mean of per-row Euclidean norms of (a - b). a, b: [B, F].
template <class T>
Var<T> mean_row_l2(const Var<T>& a, const Var<T>& b);

/// Batch mean of per-row L1 norms. a: [B, F].
template <class T>
Var<T> mean_row_l1(const Var<T>& a);

/// lambda_mae * mean|fake - real| + lambda_lpips * perceptual(fake, real).
template <class T>
Var<T> rec_loss(const Var<T>& fake, const Var<T>& real, const LossWeights& w,
                const nets::PerceptualExtractor<T>& perceptual);

template <class T>
struct ConsistencyTerms {
  Var<T> cc;  // ||E_c(fake_x) - E_c(fake_drr)||
  Var<T> sc;  // ||E_sx(real_x) - E_sx(fake_x)|| + ||E_sdrr(real_drr) - E_sdrr(fake_drr)||
};

template <class T>
ConsistencyTerms<T> consistency_terms(const nets::Model<T>& m, const Var<T>& fake_x, const Var<T>& fake_drr,
                                      const Var<T>& real_x, const Var<T>& real_drr);

template <class T>
Var<T> consistency_loss(const ConsistencyTerms<T>& t, const LossWeights& w);

/// ||E_sx(real_drr)||_1 + ||E_sdrr(real_x)||_1, batch-averaged.
template <class T>
Var<T> zero_loss(const nets::Model<T>& m, const Var<T>& real_drr, const Var<T>& real_x);
/// The same from precomputed branch outputs.
template <class T>
Var<T> zero_loss_from_codes(const Var<T>& sx_of_drr, const Var<T>& sdrr_of_x);

/// mean(-D(fake)).
template <class T>
Var<T> adv_gen_loss(const Var<T>& scores_fake);

/// mean(D(fake)) - mean(D(real)) + lambda_r1 * r1.
template <class T>
Var<T> adv_dis_loss(const Var<T>& scores_fake, const Var<T>& scores_real, const Var<T>& r1, const LossWeights& w);

enum class R1Mode { kExact, kFiniteDifference };

struct R1Options {
  R1Mode mode = R1Mode::kExact;
  double epsilon = 1e-3;
  int64_t directions = 0;  // finite-difference directions per sample; <= 0 uses all n
  uint64_t seed = 0;
};

/// Batch mean of ||grad_x D(x)||^2 at the real images.
///
/// Exact mode differentiates D with a retained graph. Finite-difference
/// mode estimates (n / K) * sum_k ((D(x + eps u_k) - D(x)) / eps)^2 with K
/// orthonormal unit directions u_k drawn as a random signed subset of the
/// coordinate frame; for a linear D and K = n this is |w|^2 exactly, and for
/// K < n it is unbiased.
template <class T>
Var<T> r1_penalty(const std::function<Var<T>(const Var<T>&)>& critic, const Tensor<T>& real, const R1Options& o);

/// Throws NonFiniteError naming `what` if any score is NaN or Inf.
template <class T>
void require_finite_scores(const Var<T>& scores, const char* what);

template <class T>
Var<T> total_gan(const Var<T>& adv_g, const Var<T>& rec, const Var<T>& consis, const Var<T>& zero,
                 const LossWeights& w);
template <class T>
Var<T> total_dis(const Var<T>& adv_d, const LossWeights& w);

}  // namespace xrs::obj
