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

// Portable reference kernels. Kept deliberately plain: these are the oracle the
// vector variants are tested against.

#include "tabret/kernels.hpp"

namespace tabret::kernels::scalar {

namespace {

template <typename T>
T dot(const T* a, const T* b, size_t n) {
  T s = 0;
  for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool accumulate) {
  for (size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    if (!accumulate)
      for (size_t j = 0; j < n; ++j) crow[j] = 0;
    for (size_t p = 0; p < k; ++p) axpy(a[i * k + p], b + p * n, crow, n);
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool accumulate) {
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      T v = dot(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + v : v;
    }
  }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool accumulate) {
  if (!accumulate)
    for (size_t i = 0; i < m * n; ++i) c[i] = 0;
  for (size_t p = 0; p < k; ++p) {
    for (size_t i = 0; i < m; ++i) axpy(a[p * m + i], b + p * n, c + i * n, n);
  }
}

}  // namespace

const KernelTable<float> kFloat{dot<float>, axpy<float>, gemm_nn<float>, gemm_nt<float>, gemm_tn<float>};
const KernelTable<double> kDouble{dot<double>, axpy<double>, gemm_nn<double>, gemm_nt<double>, gemm_tn<double>};

double dot_wide(const float* a, const float* b, size_t n) {
  double s = 0;
  for (size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

}  // namespace tabret::kernels::scalar
