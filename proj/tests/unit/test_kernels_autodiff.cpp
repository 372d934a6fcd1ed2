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
#include <iterator>
#include <random>

#include "../support.hpp"
#include "xraysynth/autodiff/grad_check.hpp"
#include "xraysynth/autodiff/ops.hpp"
#include "xraysynth/autodiff/param_store.hpp"
#include "xraysynth/simd/kernels.hpp"

using namespace xrs;
using ad::Shape;
using ad::Tensor;
using ad::Var;
using V = Var<double>;
using Inputs = std::vector<V>;

namespace {

template <class T>
std::vector<T> random_vec(size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

// Naive triple loop for C = op(A) op(B) + beta C.
template <class T>
void gemm_oracle(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const std::vector<T>& a, int64_t lda,
                 const std::vector<T>& b, int64_t ldb, T beta, std::vector<T>& c, int64_t ldc) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      long double s = 0;
      for (int64_t p = 0; p < k; ++p) {
        const T av = ta ? a[static_cast<size_t>(p * lda + i)] : a[static_cast<size_t>(i * lda + p)];
        const T bv = tb ? b[static_cast<size_t>(j * ldb + p)] : b[static_cast<size_t>(p * ldb + j)];
        s += static_cast<long double>(av) * bv;
      }
      auto& cv = c[static_cast<size_t>(i * ldc + j)];
      cv = static_cast<T>(s + static_cast<long double>(beta) * cv);
    }
}

template <class T>
void check_gemm(simd::Isa isa, double tol) {
  simd::set_isa(isa);
  std::mt19937_64 rng(3);
  for (const auto [m, n, k] : {std::array<int64_t, 3>{1, 1, 1}, {7, 5, 3}, {16, 33, 9}, {31, 17, 64}, {64, 8, 130}}) {
    for (int flags = 0; flags < 4; ++flags) {
      const bool ta = flags & 1, tb = flags & 2;
      const int64_t lda = ta ? m : k, ldb = tb ? k : n;
      auto a = random_vec<T>(static_cast<size_t>(m * k), rng);
      auto b = random_vec<T>(static_cast<size_t>(k * n), rng);
      auto c = random_vec<T>(static_cast<size_t>(m * n), rng);
      auto ref = c;
      simd::gemm<T>(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, T(0.5), c.data(), n);
      gemm_oracle<T>(ta, tb, m, n, k, a, lda, b, ldb, T(0.5), ref, n);
      for (size_t i = 0; i < c.size(); ++i) REQUIRE(std::abs(static_cast<double>(c[i] - ref[i])) < tol);
    }
  }
  simd::set_isa(simd::best_available_isa());
}

double rel_tol() { return 1e-4; }

ad::GradCheckReport check(const std::function<V(const Inputs&)>& f, const std::vector<Tensor<double>>& in) {
  auto r = ad::grad_check(f, in, rel_tol());
  INFO(r.worst);
  CHECK(r.passed());
  return r;
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar gemm matches a naive loop") {
    check_gemm<double>(simd::Isa::kScalar, 1e-12);
    check_gemm<float>(simd::Isa::kScalar, 1e-4);
  }

  TEST_CASE("avx2 gemm, dot and axpy agree with the scalar reference") {
    if (simd::best_available_isa() != simd::Isa::kAvx2) {
      MESSAGE("AVX2 not available on this host; only the scalar path is exercised");
      return;
    }
    check_gemm<double>(simd::Isa::kAvx2, 1e-12);
    check_gemm<float>(simd::Isa::kAvx2, 1e-4);
    std::mt19937_64 rng(5);
    for (int64_t n : {0, 1, 3, 4, 7, 8, 15, 16, 17, 100, 1023}) {
      auto x = random_vec<double>(static_cast<size_t>(n), rng), y = random_vec<double>(static_cast<size_t>(n), rng);
      CHECK(simd::avx2::dot(x.data(), y.data(), n) == doctest::Approx(simd::scalar::dot(x.data(), y.data(), n)).epsilon(1e-12));
      auto xf = random_vec<float>(static_cast<size_t>(n), rng), yf = random_vec<float>(static_cast<size_t>(n), rng);
      CHECK(simd::avx2::dot(xf.data(), yf.data(), n) == doctest::Approx(simd::scalar::dot(xf.data(), yf.data(), n)).epsilon(1e-4));
      auto y1 = y, y2 = y;
      simd::avx2::axpy(n, 0.75, x.data(), y1.data());
      simd::scalar::axpy(n, 0.75, x.data(), y2.data());
      for (size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));
    }
  }

  TEST_CASE("set_isa rejects an unavailable instruction set") {
    if (simd::best_available_isa() == simd::Isa::kScalar) CHECK_THROWS(simd::set_isa(simd::Isa::kAvx2));
    CHECK_NOTHROW(simd::set_isa(simd::Isa::kScalar));
    CHECK(simd::active_isa() == simd::Isa::kScalar);
    simd::set_isa(simd::best_available_isa());
  }
}

TEST_SUITE("autodiff") {
  TEST_CASE("elementwise primitives pass finite-difference checks") {
    std::mt19937_64 rng(11);
    const auto a = testing::random_tensor({3, 4}, rng, 0.2, 1.5);
    const auto b = testing::random_tensor({3, 4}, rng, 0.2, 1.5);
    check([](const Inputs& x) { return ad::sum(ad::add(x[0], x[1])); }, {a, b});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::sub(x[0], x[1]))); }, {a, b});
    check([](const Inputs& x) { return ad::sum(ad::mul(x[0], x[1])); }, {a, b});
    check([](const Inputs& x) { return ad::sum(ad::div(x[0], x[1])); }, {a, b});
    check([](const Inputs& x) { return ad::sum(ad::mul_scalar(ad::add_scalar(x[0], 2.0), -3.0)); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::abs(ad::neg(x[0]))); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::sqrt(x[0])); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::exp(x[0])); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::tanh(x[0])); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::sigmoid(x[0])); }, {a});
    const auto c = testing::random_tensor({3, 4}, rng, -1.0, 1.0);
    check([](const Inputs& x) { return ad::sum(ad::square(ad::leaky_relu(x[0], 0.2))); }, {c});
  }

  TEST_CASE("reductions, shape ops and composites pass finite-difference checks") {
    std::mt19937_64 rng(12);
    const auto a = testing::random_tensor({2, 3, 4}, rng, -1, 1);
    check([](const Inputs& x) { return ad::sum(ad::square(ad::reduce_sum(x[0], 1))); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::reduce_mean(x[0], 2))); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::broadcast_axis(x[0], 1, 3))); }, {a});
    check([](const Inputs& x) { return ad::mean(ad::square(ad::transpose_last2(x[0]))); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::reshape(x[0], Shape{6, 4}))); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::concat<double>({x[0], ad::square(x[0])}, 1))); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::slice(x[0], 2, 1, 2))); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::embed(x[0], 1, 1, 5))); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::softmax_last(x[0]))); }, {a});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::expand_scalar(ad::mean(x[0]), Shape{2, 2}))); }, {a});
    const auto m1 = testing::random_tensor({2, 3, 5}, rng, -1, 1), m2 = testing::random_tensor({2, 5, 4}, rng, -1, 1);
    check([](const Inputs& x) { return ad::sum(ad::square(ad::matmul(x[0], x[1]))); }, {m1, m2});
    const auto xb = testing::random_tensor({3, 5}, rng, -1, 1), w = testing::random_tensor({5, 2}, rng, -1, 1),
               bias = testing::random_tensor({2}, rng, -1, 1);
    check([](const Inputs& x) { return ad::sum(ad::square(ad::affine(x[0], x[1], x[2]))); }, {xb, w, bias});
  }

  TEST_CASE("convolutions, resampling and channel statistics pass finite-difference checks") {
    std::mt19937_64 rng(13);
    const auto x2 = testing::random_tensor({2, 2, 6, 6}, rng, -1, 1), w2 = testing::random_tensor({3, 2, 3, 3}, rng, -1, 1);
    check([](const Inputs& x) { return ad::sum(ad::square(ad::conv2d(x[0], x[1], 1, 1))); }, {x2, w2});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::conv2d(x[0], x[1], 2, 1))); }, {x2, w2});
    const auto x3 = testing::random_tensor({1, 2, 4, 4, 4}, rng, -1, 1),
               w3 = testing::random_tensor({2, 2, 3, 3, 3}, rng, -1, 1);
    ad::ConvGeometry g1, g2;
    g1.pad = {1, 1, 1};
    g2.stride = {2, 2, 2};
    g2.pad = {1, 1, 1};
    check([&](const Inputs& x) { return ad::sum(ad::square(ad::conv3d(x[0], x[1], g1))); }, {x3, w3});
    check([&](const Inputs& x) { return ad::sum(ad::square(ad::conv3d(x[0], x[1], g2))); }, {x3, w3});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::upsample_nearest2d(x[0], 2))); }, {x2});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::sum_pool2d(x[0], 2, 3))); }, {x2});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::adaptive_avg_pool2d(x[0], 2, 2))); }, {x2});
    const auto bc = testing::random_tensor({2}, rng, -1, 1);
    check([](const Inputs& x) { return ad::sum(ad::square(ad::add_channel_bias(x[0], x[1]))); }, {x2, bc});
    check([](const Inputs& x) { return ad::sum(ad::square(ad::channel_mean(x[0]))); }, {x2});
    check([](const Inputs& x) { return ad::sum(ad::channel_std(x[0], 1e-5)); }, {x2});
    check([&](const Inputs& x) { return ad::sum(ad::square(ad::expand_channels(ad::channel_mean(x[0]), x2.shape()))); },
          {x2});
  }

  TEST_CASE("second-order gradients match finite differences of first-order ones") {
    REQUIRE(ad::double_backward_available());
    std::mt19937_64 rng(14);
    const auto x = testing::random_tensor({1, 1, 5, 5}, rng, -1, 1), w = testing::random_tensor({2, 1, 3, 3}, rng, -1, 1);
    // Squared input-gradient norm of a small conv critic, differentiated wrt w.
    auto f = [](const Inputs& in) {
      auto score = ad::sum(ad::tanh(ad::conv2d(in[0], in[1], 1, 1)));
      auto g = ad::grad(score, {in[0]}, true)[0];
      return ad::sum(ad::square(g));
    };
    auto r = ad::grad_check(f, {x, w}, 1e-6);
    INFO(r.worst);
    CHECK(r.passed());
  }

  TEST_CASE("a first-order-only engine refuses create_graph") {
    ad::set_max_derivative_order(1);
    CHECK_FALSE(ad::double_backward_available());
    auto x = V::leaf(Tensor<double>({2}, {1.0, 2.0}));
    auto y = ad::sum(ad::square(x));
    CHECK_THROWS(ad::grad(y, {x}, true));
    CHECK_NOTHROW(ad::grad(y, {x}, false));
    ad::set_max_derivative_order(2);
    CHECK(ad::double_backward_available());
  }

  TEST_CASE("NoGrad records nothing and FiniteChecks names the failing primitive") {
    auto x = V::leaf(Tensor<double>({2}, {1.0, -1.0}));
    {
      ad::NoGrad ng;
      CHECK_FALSE(ad::square(x).requires_grad());
    }
    CHECK(ad::square(x).requires_grad());
    ad::FiniteChecks fc(true);
    auto z = V::leaf(Tensor<double>({1}, {0.0}));
    CHECK_THROWS_AS(ad::div(x, ad::expand_scalar(z, Shape{2})), ad::NonFiniteError);
  }

  TEST_CASE("gradient of an unused input is zero") {
    auto a = V::leaf(Tensor<double>({2}, {1.0, 2.0})), b = V::leaf(Tensor<double>({3}, 1.0));
    auto g = ad::grad(ad::sum(ad::square(a)), {a, b});
    CHECK(g[1].value()[0] == 0.0);
    CHECK(g[0].value()[1] == 4.0);
  }
}

TEST_SUITE("param_store") {
  TEST_CASE("save then load then save is byte-identical") {
    testing::TempDir dir("store");
    ad::ParamStore<float> s(42);
    s.create("a.w", {3, 4}, ad::InitSpec::he(4));
    s.create("a.b", {4}, ad::InitSpec::zeros());
    s.create("bn.mean", {2}, ad::InitSpec::constant(0.5), false);
    s.meta()["step"] = 7;
    s.save(dir.path() / "one");
    auto t = ad::ParamStore<float>::load(dir.path() / "one");
    t.save(dir.path() / "two");
    for (const char* f : {"manifest.json", "params.f32"}) {
      std::ifstream x(dir.path() / "one" / f, std::ios::binary), y(dir.path() / "two" / f, std::ios::binary);
      const std::string sx{std::istreambuf_iterator<char>(x), {}}, sy{std::istreambuf_iterator<char>(y), {}};
      CHECK(sx == sy);
    }
    CHECK(t.fingerprint() == s.fingerprint());
    CHECK_FALSE(t.trainable("bn.mean"));
    CHECK(t.meta()["step"] == 7);
    CHECK(t.parameter_names() == std::vector<std::string>{"a.w", "a.b"});
  }

  TEST_CASE("an entry's initial values depend only on the seed and its name") {
    ad::ParamStore<double> s1(9), s2(9), s3(10);
    s1.create("x", {8}, ad::InitSpec::normal(1.0));
    s2.create("other", {5}, ad::InitSpec::normal(1.0));
    s2.create("x", {8}, ad::InitSpec::normal(1.0));
    s3.create("x", {8}, ad::InitSpec::normal(1.0));
    for (int i = 0; i < 8; ++i) CHECK(s1.get("x").value()[i] == s2.get("x").value()[i]);
    CHECK(s1.get("x").value()[0] != s3.get("x").value()[0]);
    CHECK_THROWS_AS(s1.create("x", {1}, ad::InitSpec::zeros()), ContractError);
  }

  TEST_CASE("a corrupted parameter file is rejected") {
    testing::TempDir dir("store_bad");
    ad::ParamStore<float> s(1);
    s.create("w", {16}, ad::InitSpec::normal(1.0));
    s.save(dir.path());
    std::filesystem::resize_file(dir.path() / "params.f32", 10);
    CHECK_THROWS_AS(ad::ParamStore<float>::load(dir.path()), FormatError);
  }
}
