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

// Dense arithmetic kernels behind the autodiff primitives.
//
// Every kernel has a portable scalar reference and, where the build and the
// host CPU allow it, an AVX2/FMA variant. The variant is picked once at first
// use from the CPU feature flags; `set_isa` pins it explicitly (tests use this
// to compare the two paths). The environment variable XRS_SIMD=scalar forces
// the reference path for a whole process.

#include <cstdint>

namespace xrs::simd {

enum class Isa { kScalar, kAvx2 };

const char* isa_name(Isa isa);

/// Widest instruction set that is both compiled in and supported by this CPU.
Isa best_available_isa();

/// Instruction set currently used by the dispatching entry points below.
Isa active_isa();

/// Throws std::invalid_argument if `isa` is not available on this host.
void set_isa(Isa isa);

/// C = op(A) * op(B) + beta * C with row-major storage. op(A) is m x k,
/// op(B) is k x n. `trans_a` means A is stored k x m (lda is its row stride).
template <class T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
          const T* b, int64_t ldb, T beta, T* c, int64_t ldc);

template <class T>
T dot(const T* x, const T* y, int64_t n);

/// y += alpha * x
template <class T>
void axpy(int64_t n, T alpha, const T* x, T* y);

// Per-ISA entry points. `gemm_nn_acc` computes C += A * B with no transposes;
// the dispatcher packs transposed operands before calling it.
namespace scalar {
template <class T>
void gemm_nn_acc(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                 int64_t ldb, T* c, int64_t ldc);
template <class T>
T dot(const T* x, const T* y, int64_t n);
template <class T>
void axpy(int64_t n, T alpha, const T* x, T* y);
}  // namespace scalar

namespace avx2 {
bool compiled();
template <class T>
void gemm_nn_acc(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                 int64_t ldb, T* c, int64_t ldc);
template <class T>
T dot(const T* x, const T* y, int64_t n);
template <class T>
void axpy(int64_t n, T alpha, const T* x, T* y);
}  // namespace avx2

}  // namespace xrs::simd
