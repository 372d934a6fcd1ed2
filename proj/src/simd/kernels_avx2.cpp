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


// Compiled with -mavx2 -mfma. Only reached through the dispatcher after a
// runtime CPU check.

#include <immintrin.h>

#include <type_traits>

#include "xraysynth/simd/kernels.hpp"

namespace xrs::simd::avx2 {
namespace {

struct F32 {
  using scalar = float;
  using vec = __m256;
  static constexpr int kLanes = 8;
  static vec zero() { return _mm256_setzero_ps(); }
  static vec load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, vec v) { _mm256_storeu_ps(p, v); }
  static vec broadcast(float s) { return _mm256_set1_ps(s); }
  static vec fma(vec a, vec b, vec c) { return _mm256_fmadd_ps(a, b, c); }
  static vec add(vec a, vec b) { return _mm256_add_ps(a, b); }
  static float hsum(vec v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

struct F64 {
  using scalar = double;
  using vec = __m256d;
  static constexpr int kLanes = 4;
  static vec zero() { return _mm256_setzero_pd(); }
  static vec load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, vec v) { _mm256_storeu_pd(p, v); }
  static vec broadcast(double s) { return _mm256_set1_pd(s); }
  static vec fma(vec a, vec b, vec c) { return _mm256_fmadd_pd(a, b, c); }
  static vec add(vec a, vec b) { return _mm256_add_pd(a, b); }
  static double hsum(vec v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

// 4 rows x (2 * kLanes) columns register block.
template <class V>
void gemm_nn_impl(int64_t m, int64_t n, int64_t k, const typename V::scalar* a, int64_t lda,
                  const typename V::scalar* b, int64_t ldb, typename V::scalar* c, int64_t ldc) {
  using T = typename V::scalar;
  constexpr int64_t L = V::kLanes;
  constexpr int64_t NB = 2 * L;
  int64_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + (i + 0) * lda;
    const T* a1 = a + (i + 1) * lda;
    const T* a2 = a + (i + 2) * lda;
    const T* a3 = a + (i + 3) * lda;
    T* c0 = c + (i + 0) * ldc;
    T* c1 = c + (i + 1) * ldc;
    T* c2 = c + (i + 2) * ldc;
    T* c3 = c + (i + 3) * ldc;
    int64_t j = 0;
    for (; j + NB <= n; j += NB) {
      auto r00 = V::load(c0 + j), r01 = V::load(c0 + j + L);
      auto r10 = V::load(c1 + j), r11 = V::load(c1 + j + L);
      auto r20 = V::load(c2 + j), r21 = V::load(c2 + j + L);
      auto r30 = V::load(c3 + j), r31 = V::load(c3 + j + L);
      for (int64_t p = 0; p < k; ++p) {
        const T* bp = b + p * ldb + j;
        const auto b0 = V::load(bp);
        const auto b1 = V::load(bp + L);
        auto av = V::broadcast(a0[p]);
        r00 = V::fma(av, b0, r00);
        r01 = V::fma(av, b1, r01);
        av = V::broadcast(a1[p]);
        r10 = V::fma(av, b0, r10);
        r11 = V::fma(av, b1, r11);
        av = V::broadcast(a2[p]);
        r20 = V::fma(av, b0, r20);
        r21 = V::fma(av, b1, r21);
        av = V::broadcast(a3[p]);
        r30 = V::fma(av, b0, r30);
        r31 = V::fma(av, b1, r31);
      }
      V::store(c0 + j, r00);
      V::store(c0 + j + L, r01);
      V::store(c1 + j, r10);
      V::store(c1 + j + L, r11);
      V::store(c2 + j, r20);
      V::store(c2 + j + L, r21);
      V::store(c3 + j, r30);
      V::store(c3 + j + L, r31);
    }
    for (; j + L <= n; j += L) {
      auto r0 = V::load(c0 + j), r1 = V::load(c1 + j);
      auto r2 = V::load(c2 + j), r3 = V::load(c3 + j);
      for (int64_t p = 0; p < k; ++p) {
        const auto bv = V::load(b + p * ldb + j);
        r0 = V::fma(V::broadcast(a0[p]), bv, r0);
        r1 = V::fma(V::broadcast(a1[p]), bv, r1);
        r2 = V::fma(V::broadcast(a2[p]), bv, r2);
        r3 = V::fma(V::broadcast(a3[p]), bv, r3);
      }
      V::store(c0 + j, r0);
      V::store(c1 + j, r1);
      V::store(c2 + j, r2);
      V::store(c3 + j, r3);
    }
    for (; j < n; ++j) {
      T s0 = c0[j], s1 = c1[j], s2 = c2[j], s3 = c3[j];
      for (int64_t p = 0; p < k; ++p) {
        const T bv = b[p * ldb + j];
        s0 += a0[p] * bv;
        s1 += a1[p] * bv;
        s2 += a2[p] * bv;
        s3 += a3[p] * bv;
      }
      c0[j] = s0;
      c1[j] = s1;
      c2[j] = s2;
      c3[j] = s3;
    }
  }
  for (; i < m; ++i) {
    const T* ar = a + i * lda;
    T* cr = c + i * ldc;
    int64_t j = 0;
    for (; j + L <= n; j += L) {
      auto r = V::load(cr + j);
      for (int64_t p = 0; p < k; ++p) r = V::fma(V::broadcast(ar[p]), V::load(b + p * ldb + j), r);
      V::store(cr + j, r);
    }
    for (; j < n; ++j) {
      T s = cr[j];
      for (int64_t p = 0; p < k; ++p) s += ar[p] * b[p * ldb + j];
      cr[j] = s;
    }
  }
}

template <class V>
typename V::scalar dot_impl(const typename V::scalar* x, const typename V::scalar* y, int64_t n) {
  constexpr int64_t L = V::kLanes;
  auto acc0 = V::zero();
  auto acc1 = V::zero();
  int64_t i = 0;
  for (; i + 2 * L <= n; i += 2 * L) {
    acc0 = V::fma(V::load(x + i), V::load(y + i), acc0);
    acc1 = V::fma(V::load(x + i + L), V::load(y + i + L), acc1);
  }
  for (; i + L <= n; i += L) acc0 = V::fma(V::load(x + i), V::load(y + i), acc0);
  auto s = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <class V>
void axpy_impl(int64_t n, typename V::scalar alpha, const typename V::scalar* x,
               typename V::scalar* y) {
  constexpr int64_t L = V::kLanes;
  const auto av = V::broadcast(alpha);
  int64_t i = 0;
  for (; i + L <= n; i += L) V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

bool compiled() { return true; }

template <class T>
using Traits = std::conditional_t<std::is_same_v<T, float>, F32, F64>;

template <class T>
void gemm_nn_acc(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                 int64_t ldb, T* c, int64_t ldc) {
  gemm_nn_impl<Traits<T>>(m, n, k, a, lda, b, ldb, c, ldc);
}

template <class T>
T dot(const T* x, const T* y, int64_t n) {
  return dot_impl<Traits<T>>(x, y, n);
}

template <class T>
void axpy(int64_t n, T alpha, const T* x, T* y) {
  axpy_impl<Traits<T>>(n, alpha, x, y);
}

template void gemm_nn_acc<float>(int64_t, int64_t, int64_t, const float*, int64_t, const float*,
                                 int64_t, float*, int64_t);
template void gemm_nn_acc<double>(int64_t, int64_t, int64_t, const double*, int64_t,
                                  const double*, int64_t, double*, int64_t);
template float dot<float>(const float*, const float*, int64_t);
template double dot<double>(const double*, const double*, int64_t);
template void axpy<float>(int64_t, float, const float*, float*);
template void axpy<double>(int64_t, double, const double*, double*);

}  // namespace xrs::simd::avx2
