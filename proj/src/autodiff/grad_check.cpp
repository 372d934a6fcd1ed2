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


#include "xraysynth/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace xrs::ad {

GradCheckReport grad_check_leaves(const std::function<Var<double>()>& f,
                                  const std::vector<Var<double>>& leaves, double tolerance,
                                  const GradCheckOptions& options) {
  FiniteChecks checks(true);
  GradCheckReport report;
  report.tolerance = tolerance;

  std::vector<Var<double>> mutable_leaves = leaves;
  const auto analytic = grad(f(), mutable_leaves);

  std::mt19937_64 rng(options.seed);
  for (size_t li = 0; li < mutable_leaves.size(); ++li) {
    auto& leaf = mutable_leaves[li];
    const int64_t n = leaf.size();
    std::vector<int64_t> coords(static_cast<size_t>(n));
    std::iota(coords.begin(), coords.end(), 0);
    if (options.coords_per_leaf > 0 && options.coords_per_leaf < n) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<size_t>(options.coords_per_leaf));
      std::sort(coords.begin(), coords.end());
    }
    for (int64_t c : coords) {
      double& slot = leaf.mutable_value()[c];
      const double orig = slot;
      const double h = options.epsilon;
      double fp, fm;
      // Probes keep recording: f may itself call grad() (second-order checks).
      slot = orig + h;
      fp = f().item();
      slot = orig - h;
      fm = f().item();
      slot = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[li].value()[c];
      const double abs_err = std::abs(a - numeric);
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = abs_err / denom;
      ++report.coords_checked;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel > report.max_rel_error || report.worst.empty()) {
        if (rel >= report.max_rel_error) {
          std::ostringstream os;
          os << li << '[' << c << "]: analytic=" << a << " numeric=" << numeric;
          report.worst = os.str();
        }
        report.max_rel_error = std::max(report.max_rel_error, rel);
      }
    }
  }
  return report;
}

GradCheckReport grad_check(const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
                           const std::vector<Tensor<double>>& inputs, double tolerance,
                           const GradCheckOptions& options) {
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(Var<double>::leaf(t, true));
  return grad_check_leaves([&] { return f(leaves); }, leaves, tolerance, options);
}

}  // namespace xrs::ad
