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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "tabret/kernels.hpp"

namespace tabret::kernels {

namespace {

struct Dispatch {
  Isa isa;
  const KernelTable<float>* f32;
  const KernelTable<double>* f64;
  WideDotFn wide;
};

Dispatch make_dispatch(Isa isa) {
#if defined(TABRET_HAVE_AVX2_KERNELS)
  if (isa == Isa::kAvx2) return {Isa::kAvx2, &avx2::kFloat, &avx2::kDouble, avx2::dot_wide};
#endif
#if defined(TABRET_HAVE_NEON_KERNELS)
  if (isa == Isa::kNeon) return {Isa::kNeon, &neon::kFloat, &neon::kDouble, neon::dot_wide};
#endif
  return {Isa::kScalar, &scalar::kFloat, &scalar::kDouble, scalar::dot_wide};
}

Isa initial_isa() {
  Isa best = detect_isa();
  if (const char* env = std::getenv("TABRET_ISA")) {
    std::string v(env);
    if (v == "scalar") return Isa::kScalar;
    if (v == "avx2" && best == Isa::kAvx2) return Isa::kAvx2;
    if (v == "neon" && best == Isa::kNeon) return Isa::kNeon;
  }
  return best;
}

Dispatch& current() {
  static Dispatch d = make_dispatch(initial_isa());
  return d;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
    default:
      return "scalar";
  }
}

bool isa_available(Isa isa) {
  if (isa == Isa::kScalar) return true;
#if defined(TABRET_HAVE_AVX2_KERNELS)
  if (isa == Isa::kAvx2) {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }
#endif
#if defined(TABRET_HAVE_NEON_KERNELS)
  // Advanced SIMD is mandatory on AArch64.
  if (isa == Isa::kNeon) return true;
#endif
  return false;
}

Isa detect_isa() {
  if (isa_available(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_available(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

Isa active_isa() { return current().isa; }

void set_isa(Isa isa) {
  if (!isa_available(isa)) throw std::runtime_error("ISA " + std::string(to_string(isa)) + " is not available");
  current() = make_dispatch(isa);
}

const KernelTable<float>& table_f32() { return *current().f32; }
const KernelTable<double>& table_f64() { return *current().f64; }

double dot_wide(const float* a, const float* b, size_t n) { return current().wide(a, b, n); }

}  // namespace tabret::kernels
