// Copyright 2026 The ttfuse Authors. All Rights Reserved.
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
#include <vector>

#include "ttfuse/image.hpp"

namespace ttfuse {

inline constexpr int kPhantomMinSize = 64;
inline constexpr int kPhantomMaxLesions = 5;
inline constexpr double kPhantomMaxNoise = 0.1;

struct PhantomSpec {
  int size = 128;
  std::uint64_t seed = 0;
  int lesion_count = 0;
  double noise_sigma_a = 0.01;
  double noise_sigma_b = 0.01;
};

enum class Region : std::uint8_t {
  kBackground,
  kRim,
  kSoftTissue,
  kBlob,
  kDense,
  kLesion,
};

// Registered pair: a is MRI-like (soft-tissue contrast, dark rim), b is
// CT-like (bright rim and dense inclusions, flat soft tissue). Both are
// quantized to 8-bit levels.
struct PhantomPair {
  GrayImage a;
  GrayImage b;
  std::vector<Region> regions;  // shared geometry, row-major
};

PhantomPair generate_phantom(const PhantomSpec& spec);

// Spec of the index-th pair of a generated corpus.
PhantomSpec corpus_phantom_spec(std::uint64_t corpus_seed, int index,
                                int size);

}  // namespace ttfuse
