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

#include <cstdint>
#include <random>
#include <string_view>

namespace tabret {

/// SplitMix64 finalizer; used to derive independent sub-stream seeds.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t hash_tag(std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the sub-stream (tag, index) of `seed`. Sub-streams do not depend on
/// the order in which they are requested.
constexpr uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index = 0) {
  return mix64(mix64(seed ^ hash_tag(tag)) + mix64(index));
}

using Rng = std::mt19937_64;

inline Rng make_rng(uint64_t seed, std::string_view tag, uint64_t index = 0) {
  return Rng(derive_seed(seed, tag, index));
}

}  // namespace tabret
