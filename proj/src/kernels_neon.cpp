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

// NEON variants for AArch64, where Advanced SIMD is part of the base ISA.

#include "tabret/kernels.hpp"

#if defined(TABRET_HAVE_NEON_KERNELS)

#include <arm_neon.h>

namespace tabret::kernels::neon {

namespace {

float dot_f32(const float* a, const float* b, size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
  float s = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot_f64(const double* a, const double* b, size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  for (; i + 2 <= n; i += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_f32(float alpha, const float* x, float* y, size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// crow[0..n) += sum_q alpha[q] * rows[q][0..n) for four rows at once.
void axpy4_f32(const float* alpha, const float* r0, const float* r1, const float* r2, const float* r3, float* crow,
               size_t n) {
  const float32x4_t a0 = vdupq_n_f32(alpha[0]);
  const float32x4_t a1 = vdupq_n_f32(alpha[1]);
  const float32x4_t a2 = vdupq_n_f32(alpha[2]);
  const float32x4_t a3 = vdupq_n_f32(alpha[3]);
  size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    float32x4_t c = vld1q_f32(crow + j);
    c = vfmaq_f32(c, a0, vld1q_f32(r0 + j));
    c = vfmaq_f32(c, a1, vld1q_f32(r1 + j));
    c = vfmaq_f32(c, a2, vld1q_f32(r2 + j));
    c = vfmaq_f32(c, a3, vld1q_f32(r3 + j));
    vst1q_f32(crow + j, c);
  }
  for (; j < n; ++j) crow[j] += alpha[0] * r0[j] + alpha[1] * r1[j] + alpha[2] * r2[j] + alpha[3] * r3[j];
}

void axpy4_f64(const double* alpha, const double* r0, const double* r1, const double* r2, const double* r3,
               double* crow, size_t n) {
  const float64x2_t a0 = vdupq_n_f64(alpha[0]);
  const float64x2_t a1 = vdupq_n_f64(alpha[1]);
  const float64x2_t a2 = vdupq_n_f64(alpha[2]);
  const float64x2_t a3 = vdupq_n_f64(alpha[3]);
  size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    float64x2_t c = vld1q_f64(crow + j);
    c = vfmaq_f64(c, a0, vld1q_f64(r0 + j));
    c = vfmaq_f64(c, a1, vld1q_f64(r1 + j));
    c = vfmaq_f64(c, a2, vld1q_f64(r2 + j));
    c = vfmaq_f64(c, a3, vld1q_f64(r3 + j));
    vst1q_f64(crow + j, c);
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
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t va = vld1q_f32(a + i);
    const float32x4_t vb = vld1q_f32(b + i);
    acc0 = vfmaq_f64(acc0, vcvt_f64_f32(vget_low_f32(va)), vcvt_f64_f32(vget_low_f32(vb)));
    acc1 = vfmaq_f64(acc1, vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

}  // namespace tabret::kernels::neon

#endif  // TABRET_HAVE_NEON_KERNELS
