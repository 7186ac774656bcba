// Copyright 2026 The tabret Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// AVX2+FMA variants. This translation unit must not instantiate any inline
// or template code shared with other units: everything here is compiled for
// AVX2 and only reached through the dispatch table.

#include "tabret/kernels.hpp"

#if defined(TABRET_HAVE_AVX2_KERNELS)

#pragma GCC target("avx2,fma")
#include <immintrin.h>

namespace tabret::kernels::avx2 {

namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d high64 = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

float dot_f32(const float* a, const float* b, size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float s = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot_f64(const double* a, const double* b, size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_f32(float alpha, const float* x, float* y, size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// crow[0..n) += sum_q alpha[q] * rows[q][0..n) for four rows at once.
void axpy4_f32(const float* alpha, const float* r0, const float* r1, const float* r2, const float* r3, float* crow,
               size_t n) {
  const __m256 a0 = _mm256_set1_ps(alpha[0]);
  const __m256 a1 = _mm256_set1_ps(alpha[1]);
  const __m256 a2 = _mm256_set1_ps(alpha[2]);
  const __m256 a3 = _mm256_set1_ps(alpha[3]);
  size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256 c = _mm256_loadu_ps(crow + j);
    c = _mm256_fmadd_ps(a0, _mm256_loadu_ps(r0 + j), c);
    c = _mm256_fmadd_ps(a1, _mm256_loadu_ps(r1 + j), c);
    c = _mm256_fmadd_ps(a2, _mm256_loadu_ps(r2 + j), c);
    c = _mm256_fmadd_ps(a3, _mm256_loadu_ps(r3 + j), c);
    _mm256_storeu_ps(crow + j, c);
  }
  for (; j < n; ++j) crow[j] += alpha[0] * r0[j] + alpha[1] * r1[j] + alpha[2] * r2[j] + alpha[3] * r3[j];
}

void axpy4_f64(const double* alpha, const double* r0, const double* r1, const double* r2, const double* r3,
               double* crow, size_t n) {
  const __m256d a0 = _mm256_set1_pd(alpha[0]);
  const __m256d a1 = _mm256_set1_pd(alpha[1]);
  const __m256d a2 = _mm256_set1_pd(alpha[2]);
  const __m256d a3 = _mm256_set1_pd(alpha[3]);
  size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d c = _mm256_loadu_pd(crow + j);
    c = _mm256_fmadd_pd(a0, _mm256_loadu_pd(r0 + j), c);
    c = _mm256_fmadd_pd(a1, _mm256_loadu_pd(r1 + j), c);
    c = _mm256_fmadd_pd(a2, _mm256_loadu_pd(r2 + j), c);
    c = _mm256_fmadd_pd(a3, _mm256_loadu_pd(r3 + j), c);
    _mm256_storeu_pd(crow + j, c);
  }
  for (; j < n; ++j) crow[j] += alpha[0] * r0[j] + alpha[1] * r1[j] + alpha[2] * r2[j] + alpha[3] * r3[j];
}

#define TABRET_DEFINE_GEMMS(T, SUFFIX)                                                                    \
  void gemm_nn_##SUFFIX(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool accumulate) { \
    for (size_t i = 0; i < m; ++i) {                                                                     \
      T* crow = c + i * n;                                                                               \
      if (!accumulate)                                                                                   \
        for (size_t j = 0; j < n; ++j) crow[j] = 0;                                                      \
      const T* arow = a + i * k;                                                                         \
      size_t p = 0;                                                                                      \
      for (; p + 4 <= k; p += 4)                                                                         \
        axpy4_##SUFFIX(arow + p, b + p * n, b + (p + 1) * n, b + (p + 2) * n, b + (p + 3) * n, crow, n); \
      for (; p < k; ++p) axpy_##SUFFIX(arow[p], b + p * n, crow, n);                                     \
    }                                                                                                    \
  }                                                                                                      \
  void gemm_nt_##SUFFIX(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool accumulate) { \
    for (size_t i = 0; i < m; ++i) {                                                                     \
      for (size_t j = 0; j < n; ++j) {                                                                   \
        T v = dot_##SUFFIX(a + i * k, b + j * k, k);                                                     \
        c[i * n + j] = accumulate ? c[i * n + j] + v : v;                                                \
      }                                                                                                  \
    }                                                                                                    \
  }                                                                                                      \
  void gemm_tn_##SUFFIX(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool accumulate) { \
    if (!accumulate)                                                                                     \
      for (size_t i = 0; i < m * n; ++i) c[i] = 0;                                                       \
    for (size_t i = 0; i < m; ++i) {                                                                     \
      T* crow = c + i * n;                                                                               \
      size_t p = 0;                                                                                      \
      for (; p + 4 <= k; p += 4) {                                                                       \
        const T alpha[4] = {a[p * m + i], a[(p + 1) * m + i], a[(p + 2) * m + i], a[(p + 3) * m + i]};   \
        axpy4_##SUFFIX(alpha, b + p * n, b + (p + 1) * n, b + (p + 2) * n, b + (p + 3) * n, crow, n);    \
      }                                                                                                  \
      for (; p < k; ++p) axpy_##SUFFIX(a[p * m + i], b + p * n, crow, n);                                \
    }                                                                                                    \
  }

TABRET_DEFINE_GEMMS(float, f32)
TABRET_DEFINE_GEMMS(double, f64)

#undef TABRET_DEFINE_GEMMS

}  // namespace

const KernelTable<float> kFloat{dot_f32, axpy_f32, gemm_nn_f32, gemm_nt_f32, gemm_tn_f32};
const KernelTable<double> kDouble{dot_f64, axpy_f64, gemm_nn_f64, gemm_nt_f64, gemm_tn_f64};

double dot_wide(const float* a, const float* b, size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 va = _mm256_loadu_ps(a + i);
    __m256 vb = _mm256_loadu_ps(b + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                           _mm256_cvtps_pd(_mm256_castps256_ps128(vb)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                           _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

}  // namespace tabret::kernels::avx2

#endif  // TABRET_HAVE_AVX2_KERNELS
