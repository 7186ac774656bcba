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

#pragma once

// Dense arithmetic kernels behind the autograd ops and the retrieval index.
//
// Every kernel has a portable scalar reference plus an AVX2+FMA variant on
// x86-64 and a NEON variant on AArch64. The variant is chosen once at startup
// from the CPU (override with the TABRET_ISA=scalar|avx2|neon environment
// variable). All matrices are row-major.

#include <cstddef>
#include <string_view>

namespace tabret::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa);

/// Best ISA the running CPU supports (and that was compiled in).
Isa detect_isa();
Isa active_isa();
/// Re-points the dispatch table. Throws if the ISA is unavailable.
void set_isa(Isa isa);
bool isa_available(Isa isa);

template <typename T>
struct KernelTable {
  /// sum_i a[i] * b[i]
  T (*dot)(const T* a, const T* b, size_t n);
  /// y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, size_t n);
  /// C[m,n] (+)= A[m,k] * B[k,n]
  void (*gemm_nn)(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool accumulate);
  /// C[m,n] (+)= A[m,k] * B[n,k]^T
  void (*gemm_nt)(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool accumulate);
  /// C[m,n] (+)= A[k,m]^T * B[k,n]
  void (*gemm_tn)(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool accumulate);
};

/// Float dot product accumulated in double. Products of two floats are exact
/// in double, so variants differ only by summation order.
using WideDotFn = double (*)(const float* a, const float* b, size_t n);

namespace scalar {
extern const KernelTable<float> kFloat;
extern const KernelTable<double> kDouble;
double dot_wide(const float* a, const float* b, size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define TABRET_HAVE_AVX2_KERNELS 1
namespace avx2 {
extern const KernelTable<float> kFloat;
extern const KernelTable<double> kDouble;
double dot_wide(const float* a, const float* b, size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__) && defined(__ARM_NEON)
#define TABRET_HAVE_NEON_KERNELS 1
namespace neon {
extern const KernelTable<float> kFloat;
extern const KernelTable<double> kDouble;
double dot_wide(const float* a, const float* b, size_t n);
}  // namespace neon
#endif

const KernelTable<float>& table_f32();
const KernelTable<double>& table_f64();

template <typename T>
const KernelTable<T>& table();
template <>
inline const KernelTable<float>& table<float>() {
  return table_f32();
}
template <>
inline const KernelTable<double>& table<double>() {
  return table_f64();
}

double dot_wide(const float* a, const float* b, size_t n);

}  // namespace tabret::kernels
