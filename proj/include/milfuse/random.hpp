// Copyright 2026 The milfuse Authors
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

#ifndef MILFUSE_RANDOM_HPP_
#define MILFUSE_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace milfuse {

using Rng = std::mt19937_64;

/// Independent child seed for a named stream of a master seed (splitmix64
/// finalizer over the pair).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream tags used across modules.
namespace streams {
inline constexpr std::uint64_t kClsInit = 1000;
inline constexpr std::uint64_t kDetInit = 2000;
inline constexpr std::uint64_t kRefineInit = 3000;
inline constexpr std::uint64_t kShuffle = 4000;
inline constexpr std::uint64_t kSplit = 5000;
inline constexpr std::uint64_t kImage = 6000;
inline constexpr std::uint64_t kSignatures = 7000;
inline constexpr std::uint64_t kSampling = 8000;
}  // namespace streams

}  // namespace milfuse

#endif  // MILFUSE_RANDOM_HPP_
