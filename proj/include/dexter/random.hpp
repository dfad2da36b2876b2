/*
 * Copyright 2026 The DEXTER-OOD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dexter {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent sub-seeds so that adding
// streams (rows, episodes, trees) never perturbs existing ones.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// sub_seed = splitmix64(splitmix64(master) ^ index), folded left over indices.
constexpr std::uint64_t mix_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t index : path) s = splitmix64(s ^ splitmix64(index + 1));
  return s;
}

constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  return mix_seed(master, {index});
}

}  // namespace dexter
