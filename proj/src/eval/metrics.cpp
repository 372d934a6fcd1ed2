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


#include "xraysynth/eval/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>

namespace xrs::eval {

namespace {

std::vector<double> to_double(const vol::ImagePlane& p) { return {p.pixels.begin(), p.pixels.end()}; }

void require_same(const vol::ImagePlane& a, const vol::ImagePlane& b, const char* what) {
  if (a.height != b.height || a.width != b.width)
    throw ContractError(std::string(what) + ": image shapes differ (" + std::to_string(a.height) + "x" +
                        std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) +
                        ")");
}

using Matrix = Eigen::MatrixXd;

Matrix to_matrix(const Tensor<double>& t) {
  if (t.rank() != 2) throw ContractError("feature set must be [n, d]");
  Matrix m(t.dim(0), t.dim(1));
  for (int64_t i = 0; i < t.dim(0); ++i)
    for (int64_t j = 0; j < t.dim(1); ++j) m(i, j) = t[i * t.dim(1) + j];
  return m;
}

void require_set_sizes(const Tensor<double>& a, const Tensor<double>& b, const char* what) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw ContractError(std::string(what) + ": feature sets must be [n, d] with equal d");
  if (a.dim(0) < kMinSetSize || b.dim(0) < kMinSetSize)
    throw ContractError(std::string(what) + ": each set needs at least " + std::to_string(kMinSetSize) +
                        " images (got " + std::to_string(a.dim(0)) + " and " + std::to_string(b.dim(0)) + ")");
}

// Symmetric PSD square root with negative eigenvalues clamped to zero.
Matrix psd_sqrt(const Matrix& m, double& clamped) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < 0.0) {
      clamped += -ev[i];
      ev[i] = 0.0;
    }
    ev[i] = std::sqrt(ev[i]);
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double psnr(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("psnr: size mismatch");
  if (a.empty()) throw ContractError("psnr: empty images");
  double mse = 0.0;
  for (size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const vol::ImagePlane& a, const vol::ImagePlane& b) {
  require_same(a, b, "psnr");
  const auto da = to_double(a), db = to_double(b);
  return psnr(da, db);
}

double ssim(std::span<const double> a, std::span<const double> b, int64_t height, int64_t width) {
  if (static_cast<int64_t>(a.size()) != height * width || a.size() != b.size())
    throw ContractError("ssim: size mismatch");
  if (height < kSsimWindow || width < kSsimWindow) throw ContractError("ssim: images smaller than the 7x7 window");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const double n = static_cast<double>(kSsimWindow * kSsimWindow);
  double total = 0.0;
  int64_t windows = 0;
  for (int64_t r = 0; r + kSsimWindow <= height; ++r) {
    for (int64_t c = 0; c + kSsimWindow <= width; ++c) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int64_t i = 0; i < kSsimWindow; ++i) {
        for (int64_t j = 0; j < kSsimWindow; ++j) {
          const size_t k = static_cast<size_t>((r + i) * width + c + j);
          sa += a[k];
          sb += b[k];
          saa += a[k] * a[k];
          sbb += b[k] * b[k];
          sab += a[k] * b[k];
        }
      }
      const double ma = sa / n, mb = sb / n;
      const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

double ssim(const vol::ImagePlane& a, const vol::ImagePlane& b) {
  require_same(a, b, "ssim");
  const auto da = to_double(a), db = to_double(b);
  return ssim(da, db, a.height, a.width);
}

FidResult fid(const Tensor<double>& ta, const Tensor<double>& tb) {
  require_set_sizes(ta, tb, "fid");
  const Matrix a = to_matrix(ta), b = to_matrix(tb);
  const Eigen::RowVectorXd mu_a = a.colwise().mean(), mu_b = b.colwise().mean();
  const Matrix ca = a.rowwise() - mu_a, cb = b.rowwise() - mu_b;
  const Matrix sa = (ca.transpose() * ca) / static_cast<double>(a.rows() - 1);
  const Matrix sb = (cb.transpose() * cb) / static_cast<double>(b.rows() - 1);
  FidResult r;
  // tr((Sa Sb)^1/2) = tr((Sa^1/2 Sb Sa^1/2)^1/2), the latter symmetric.
  const Matrix ra = psd_sqrt(sa, r.clamped);
  const Matrix cross = psd_sqrt(ra * sb * ra, r.clamped);
  r.value = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * cross.trace();
  r.value = std::max(r.value, 0.0);
  return r;
}

double kid(const Tensor<double>& ta, const Tensor<double>& tb, int64_t degree) {
  require_set_sizes(ta, tb, "kid");
  if (degree < 1) throw ContractError("kid: degree must be >= 1");
  const Matrix a = to_matrix(ta), b = to_matrix(tb);
  const double d = static_cast<double>(a.cols());
  auto kernel = [&](const Matrix& x, const Matrix& y) {
    return ((x * y.transpose()).array() / d + 1.0).pow(static_cast<double>(degree)).matrix().eval();
  };
  const double m = static_cast<double>(a.rows()), n = static_cast<double>(b.rows());
  const Matrix kaa = kernel(a, a), kbb = kernel(b, b), kab = kernel(a, b);
  const double saa = (kaa.sum() - kaa.trace()) / (m * (m - 1));
  const double sbb = (kbb.sum() - kbb.trace()) / (n * (n - 1));
  // Equal sizes: the paired U-statistic, which also skips the i == j cross terms
  // and is exactly zero for identical sets.
  if (a.rows() == b.rows()) return saa + sbb - 2.0 * (kab.sum() - kab.trace()) / (m * (m - 1));
  return saa + sbb - 2.0 * kab.sum() / (m * n);
}

Tensor<double> extract_features(const nets::PerceptualExtractor<double>& net,
                                const std::vector<vol::ImagePlane>& images) {
  if (images.empty()) throw ContractError("extract_features: no images");
  const int64_t h = images.front().height, w = images.front().width;
  constexpr int64_t kChunk = 32;
  std::vector<double> rows;
  int64_t dim = 0;
  ad::NoGrad no_grad;
  for (size_t start = 0; start < images.size(); start += kChunk) {
    const int64_t n = std::min<int64_t>(kChunk, static_cast<int64_t>(images.size() - start));
    Tensor<double> x({n, 1, h, w});
    for (int64_t i = 0; i < n; ++i) {
      const auto& img = images[start + static_cast<size_t>(i)];
      if (img.height != h || img.width != w) throw ContractError("extract_features: images differ in size");
      std::copy(img.pixels.begin(), img.pixels.end(), x.data() + i * h * w);
    }
    const auto f = net.embed(ad::Var<double>::constant(std::move(x)));
    dim = f.dim(1);
    rows.insert(rows.end(), f.values().begin(), f.values().end());
  }
  return Tensor<double>({static_cast<int64_t>(images.size()), dim}, std::move(rows));
}

void MetricReport::set(const std::string& name, double value, int64_t count) {
  values[name] = value;
  counts[name] = count;
}

double MetricReport::get(const std::string& name) const { return values.at(name).get<double>(); }

nlohmann::json MetricReport::to_json() const {
  return {{"metrics", values},
          {"counts", counts},
          {"extractor_seed", extractor_seed},
          {"kid_degree", kid_degree},
          {"notes", notes}};
}

void add_distribution_metrics(MetricReport& report, const std::string& tag,
                              const nets::PerceptualExtractor<double>& net, const std::vector<vol::ImagePlane>& a,
                              const std::vector<vol::ImagePlane>& b) {
  const auto fa = extract_features(net, a), fb = extract_features(net, b);
  const auto f = fid(fa, fb);
  const int64_t count = std::min<int64_t>(fa.dim(0), fb.dim(0));
  report.set("fid_" + tag, f.value, count);
  report.set("kid_" + tag, kid(fa, fb, report.kid_degree), count);
  if (f.clamped > 0.0)
    {
    char buf[96];
    std::snprintf(buf, sizeof buf, ": clamped negative eigenvalue mass %.3g", f.clamped);
    report.notes.push_back("fid_" + tag + buf);
  }
}

}  // namespace xrs::eval
