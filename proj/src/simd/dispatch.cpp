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


#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "xraysynth/simd/kernels.hpp"

namespace xrs::simd {

#ifndef XRS_HAVE_AVX2
namespace avx2 {
bool compiled() { return false; }
template <class T>
void gemm_nn_acc(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                 int64_t ldb, T* c, int64_t ldc) {
  scalar::gemm_nn_acc(m, n, k, a, lda, b, ldb, c, ldc);
}
template <class T>
T dot(const T* x, const T* y, int64_t n) {
  return scalar::dot(x, y, n);
}
template <class T>
void axpy(int64_t n, T alpha, const T* x, T* y) {
  scalar::axpy(n, alpha, x, y);
}
template void gemm_nn_acc<float>(int64_t, int64_t, int64_t, const float*, int64_t, const float*,
                                 int64_t, float*, int64_t);
template void gemm_nn_acc<double>(int64_t, int64_t, int64_t, const double*, int64_t,
                                  const double*, int64_t, double*, int64_t);
template float dot<float>(const float*, const float*, int64_t);
template double dot<double>(const double*, const double*, int64_t);
template void axpy<float>(int64_t, float, const float*, float*);
template void axpy<double>(int64_t, double, const double*, double*);
}  // namespace avx2
#endif

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("XRS_SIMD")) {
    if (std::string_view(env) == "scalar") return Isa::kScalar;
  }
  return best_available_isa();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

template <class T>
void pack_transpose(const T* src, int64_t rows, int64_t cols, int64_t ld, std::vector<T>& dst) {
  // src is rows x cols (stride ld); dst becomes cols x rows, contiguous.
  dst.resize(static_cast<size_t>(rows * cols));
  for (int64_t r = 0; r < rows; ++r) {
    const T* s = src + r * ld;
    for (int64_t c = 0; c < cols; ++c) dst[static_cast<size_t>(c * rows + r)] = s[c];
  }
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

Isa best_available_isa() {
  static const Isa best = (avx2::compiled() && cpu_has_avx2()) ? Isa::kAvx2 : Isa::kScalar;
  return best;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (isa == Isa::kAvx2 && best_available_isa() != Isa::kAvx2)
    throw std::invalid_argument("simd: AVX2 kernels are not available on this host");
  current().store(isa, std::memory_order_relaxed);
}

template <class T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
          const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
  if (beta == T(0)) {
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) c[i * ldc + j] = T(0);
  } else if (beta != T(1)) {
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) c[i * ldc + j] *= beta;
  }
  if (m == 0 || n == 0 || k == 0) return;

  std::vector<T> a_packed, b_packed;
  const T* ap = a;
  const T* bp = b;
  int64_t lda_eff = lda, ldb_eff = ldb;
  if (trans_a) {
    pack_transpose(a, k, m, lda, a_packed);
    ap = a_packed.data();
    lda_eff = k;
  }
  if (trans_b) {
    pack_transpose(b, n, k, ldb, b_packed);
    bp = b_packed.data();
    ldb_eff = n;
  }
  if (active_isa() == Isa::kAvx2)
    avx2::gemm_nn_acc(m, n, k, ap, lda_eff, bp, ldb_eff, c, ldc);
  else
    scalar::gemm_nn_acc(m, n, k, ap, lda_eff, bp, ldb_eff, c, ldc);
}

template <class T>
T dot(const T* x, const T* y, int64_t n) {
  return active_isa() == Isa::kAvx2 ? avx2::dot(x, y, n) : scalar::dot(x, y, n);
}

template <class T>
void axpy(int64_t n, T alpha, const T* x, T* y) {
  if (active_isa() == Isa::kAvx2)
    avx2::axpy(n, alpha, x, y);
  else
    scalar::axpy(n, alpha, x, y);
}

template void gemm<float>(bool, bool, int64_t, int64_t, int64_t, const float*, int64_t,
                          const float*, int64_t, float, float*, int64_t);
template void gemm<double>(bool, bool, int64_t, int64_t, int64_t, const double*, int64_t,
                           const double*, int64_t, double, double*, int64_t);
template float dot<float>(const float*, const float*, int64_t);
template double dot<double>(const double*, const double*, int64_t);
template void axpy<float>(int64_t, float, const float*, float*);
template void axpy<double>(int64_t, double, const double*, double*);

}  // namespace xrs::simd
