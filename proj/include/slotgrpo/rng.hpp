// Copyright 2026 The slotgrpo Authors.
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

namespace slotgrpo {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Stable sub-seed for (seed, purpose, key, index). Independent of call order,
/// so streams can be handed to worker threads without changing results.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                                    std::string_view key = {},
                                    std::uint64_t index = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ fnv1a(purpose));
  h = mix64(h ^ fnv1a(key));
  return mix64(h ^ index);
}

inline Rng make_stream(std::uint64_t seed, std::string_view purpose,
                       std::string_view key = {}, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, purpose, key, index));
}

}  // namespace slotgrpo
