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

#include <filesystem>
#include <utility>
#include <variant>
#include <vector>

#include "ttfuse/tensor.hpp"

namespace ttfuse {

// Single-channel image, row-major, values in [0,1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0)
      : width(width),
        height(height),
        pixels(static_cast<std::size_t>(width) * height, fill) {}

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Interleaved RGB, values in [0,1].
struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;
};

struct ChromaPlanes {
  int width = 0;
  int height = 0;
  std::vector<double> cb;
  std::vector<double> cr;
};

using Image = std::variant<GrayImage, ColorImage>;

// PNG (8-bit gray or RGB, no alpha, not interlaced) or binary PGM (P5,
// maxval 255), detected by signature. Errors: kNotFound, kUnsupportedFormat,
// kTruncated, kCorrupt.
Image load_image(const std::filesystem::path& path);

// Format by extension (.png or .pgm); pixels are rounded to 8 bits.
void save_image(const std::filesystem::path& path, const GrayImage& image);
void save_image(const std::filesystem::path& path, const ColorImage& image);

// BT.601: Y = 0.299R + 0.587G + 0.114B, Cb = 0.564(B - Y) + 0.5,
// Cr = 0.713(R - Y) + 0.5. Achromatic pixels map exactly to (v, 0.5, 0.5).
std::pair<GrayImage, ChromaPlanes> split_luma(const ColorImage& color);
// Algebraic inverse of split_luma, clamped to [0,1].
ColorImage merge_luma(const GrayImage& luma, const ChromaPlanes& chroma);

// Luminance of any image.
GrayImage to_gray(const Image& image);

// Rounds every pixel to the nearest of the 256 8-bit levels.
GrayImage quantize(const GrayImage& image);

Tensor to_tensor(const GrayImage& image);
// Takes a (1,1,H,W) tensor; values are clamped to [0,1].
GrayImage to_image(const Tensor& tensor);

}  // namespace ttfuse
