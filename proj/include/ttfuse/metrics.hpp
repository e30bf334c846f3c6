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

#include <array>
#include <vector>

#include "ttfuse/image.hpp"

namespace ttfuse {

// PSNR reported for identical images.
inline constexpr double kPsnrCap = 100.0;

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr int kFsimMinSize = 32;

// All metrics take images in [0,1] and score them on the 0..255 scale.

double psnr(const GrayImage& x, const GrayImage& y);
// Mean of psnr(fused, a) and psnr(fused, b).
double psnr(const GrayImage& fused, const GrayImage& a, const GrayImage& b);

// Mean SSIM over all fully-covered 11x11 Gaussian windows.
double ssim(const GrayImage& x, const GrayImage& y);
double ssim(const GrayImage& fused, const GrayImage& a, const GrayImage& b);

// Sobel magnitude quantized to 256 bins on a fixed scale.
std::vector<int> gradient_bins(const GrayImage& image);
// 2 I(X;Y) / (H(X) + H(Y)) over 256-bin histograms; 1 if both are constant.
double normalized_mutual_information(const std::vector<int>& x,
                                     const std::vector<int>& y);
double fmi(const GrayImage& fused, const GrayImage& a, const GrayImage& b);

// Phase congruency of a 0..255 image: log-Gabor bank, 4 scales x 4
// orientations.
std::vector<double> phase_congruency(const std::vector<double>& image,
                                     int width, int height);
double fsim(const GrayImage& x, const GrayImage& y);
double fsim(const GrayImage& fused, const GrayImage& a, const GrayImage& b);

std::array<double, 256> intensity_histogram(const GrayImage& image);
// Shannon entropy in bits of the 256-level intensity histogram.
double entropy(const GrayImage& image);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double fmi = 0.0;
  double fsim = 0.0;
  double en = 0.0;
};

MetricReport evaluate(const GrayImage& fused, const GrayImage& a,
                      const GrayImage& b);

}  // namespace ttfuse
