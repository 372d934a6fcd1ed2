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
#include <string>
#include <vector>

#include "xraysynth/autodiff/var.hpp"

namespace xrs::ad {

struct GradCheckOptions {
  double epsilon = 1e-6;
  /// Relative error uses max(|analytic|, |numeric|, denominator_floor).
  double denominator_floor = 1e-8;
  /// Coordinates probed per leaf; <= 0 probes all of them.
  int64_t coords_per_leaf = -1;
  uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  int64_t coords_checked = 0;
  std::string worst;  // "<leaf index>[<coord>]: analytic=.. numeric=.."
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Compares reverse-mode gradients of a scalar function of `inputs` with
/// central finite differences. Runs with finite checks on, so a NaN/Inf in
/// any intermediate raises NonFiniteError naming the primitive.
GradCheckReport grad_check(const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
                           const std::vector<Tensor<double>>& inputs, double tolerance,
                           const GradCheckOptions& options = {});

/// Same check over existing leaves (typically parameters). `f` is
/// re-evaluated after each in-place perturbation of a leaf coordinate.
GradCheckReport grad_check_leaves(const std::function<Var<double>()>& f,
                                  const std::vector<Var<double>>& leaves, double tolerance,
                                  const GradCheckOptions& options = {});

}  // namespace xrs::ad
