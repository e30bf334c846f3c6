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
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "ttfuse/image.hpp"
#include "ttfuse/rng.hpp"
#include "ttfuse/tensor.hpp"

namespace ttfuse::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  SplitMix64 rng(seed);
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline GrayImage random_image(int width, int height, std::uint64_t seed) {
  SplitMix64 rng(seed);
  GrayImage img(width, height);
  for (double& v : img.pixels) v = static_cast<double>(rng.below(256)) / 255.0;
  return img;
}

inline Tensor copy_tensor(const Tensor& t) {
  return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

// 64-bit FNV-1a, used to freeze golden artifacts.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::uint8_t> image_bytes(const GrayImage& img) {
  std::vector<std::uint8_t> out;
  out.reserve(img.pixels.size());
  for (double v : img.pixels) {
    out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  return out;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Fresh scratch directory under the system temp dir.
std::string scratch_dir(const std::string& name);

}  // namespace ttfuse::testing
