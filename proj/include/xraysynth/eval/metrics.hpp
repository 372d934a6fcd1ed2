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
#include <span>
#include <vector>

#include "json.hpp"
#include "xraysynth/nets/perceptual.hpp"
#include "xraysynth/volume/volume.hpp"

namespace xrs::eval {

using ad::Tensor;

inline constexpr double kPsnrCap = 99.0;
inline constexpr int64_t kSsimWindow = 7;
inline constexpr int64_t kMinSetSize = 16;

/// 10 log10(1 / MSE) for images in [0,1], capped at 99 dB.
double psnr(std::span<const double> a, std::span<const double> b);
double psnr(const vol::ImagePlane& a, const vol::ImagePlane& b);

/// Mean SSIM over all valid 7x7 windows (uniform weights, population
/// moments, C1 = 0.01^2, C2 = 0.03^2, unit dynamic range).
double ssim(std::span<const double> a, std::span<const double> b, int64_t height, int64_t width);
double ssim(const vol::ImagePlane& a, const vol::ImagePlane& b);

struct FidResult {
  double value = 0.0;
  /// Sum of |negative eigenvalues| zeroed while taking matrix square roots.
  double clamped = 0.0;
};

/// Frechet distance between Gaussians fitted to two feature sets [n, d].
/// Each set needs at least kMinSetSize rows.
FidResult fid(const Tensor<double>& a, const Tensor<double>& b);

/// Unbiased MMD^2 with the polynomial kernel (x.y / d + 1)^degree.
double kid(const Tensor<double>& a, const Tensor<double>& b, int64_t degree = 3);

/// Pooled final-stage extractor features for a set of equally sized images.
Tensor<double> extract_features(const nets::PerceptualExtractor<double>& net,
                                const std::vector<vol::ImagePlane>& images);

struct MetricReport {
  nlohmann::json values = nlohmann::json::object();  // metric name -> scalar
  nlohmann::json counts = nlohmann::json::object();  // metric name -> sample count
  uint64_t extractor_seed = nets::PerceptualExtractor<double>::kDefaultSeed;
  int64_t kid_degree = 3;
  std::vector<std::string> notes;

  void set(const std::string& name, double value, int64_t count);
  double get(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// FID and KID between two image sets through one extractor.
void add_distribution_metrics(MetricReport& report, const std::string& tag,
                              const nets::PerceptualExtractor<double>& net, const std::vector<vol::ImagePlane>& a,
                              const std::vector<vol::ImagePlane>& b);

}  // namespace xrs::eval
