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

#include <doctest.h>

#include <cmath>
#include <map>

#include "support.hpp"
#include "ttfuse/error.hpp"
#include "ttfuse/metrics.hpp"
#include "ttfuse/phantom.hpp"

using namespace ttfuse;
using ttfuse::testing::random_image;

namespace {

GrayImage constant(int w, int h, int level) { return GrayImage(w, h, level / 255.0); }

GrayImage offset(const GrayImage& img, int levels) {
  GrayImage out = img;
  for (double& v : out.pixels) v += levels / 255.0;
  return out;
}

GrayImage box_blur(const GrayImage& img) {
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          s += img.at(std::clamp(x + dx, 0, img.width - 1), std::clamp(y + dy, 0, img.height - 1));
      out.at(x, y) = s / 9.0;
    }
  }
  return out;
}

// Brute-force windowed SSIM: each window evaluated directly, no separable passes.
double ssim_oracle(const GrayImage& x, const GrayImage& y) {
  const int r = 5;
  double g[11][11];
  double total = 0.0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) total += g[i + r][j + r] = std::exp(-(i * i + j * j) / (2 * 1.5 * 1.5));
  const double c1 = 2.55 * 2.55, c2 = 7.65 * 7.65;
  double sum = 0.0;
  int count = 0;
  for (int cy = r; cy < x.height - r; ++cy) {
    for (int cx = r; cx < x.width - r; ++cx) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = -r; i <= r; ++i) {
        for (int j = -r; j <= r; ++j) {
          const double wgt = g[i + r][j + r] / total;
          const double a = 255.0 * x.at(cx + j, cy + i), b = 255.0 * y.at(cx + j, cy + i);
          mx += wgt * a;
          my += wgt * b;
          sxx += wgt * a * a;
          syy += wgt * b * b;
          sxy += wgt * a * b;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return sum / count;
}

// Plug-in mutual information from a joint histogram of two label vectors.
double nmi_oracle(const std::vector<int>& x, const std::vector<int>& y) {
  std::map<int, double> px, py;
  std::map<std::pair<int, int>, double> pxy;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    px[x[i]] += 1 / n;
    py[y[i]] += 1 / n;
    pxy[{x[i], y[i]}] += 1 / n;
  }
  auto h = [](const auto& m) {
    double s = 0;
    for (const auto& kv : m) s -= kv.second * std::log2(kv.second);
    return s;
  };
  const double hx = h(px), hy = h(py), hxy = h(pxy);
  if (hx + hy == 0.0) return 1.0;
  return 2.0 * (hx + hy - hxy) / (hx + hy);
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("psnr oracles") {
    const GrayImage base = constant(32, 32, 100);
    CHECK(psnr(base, offset(base, 16)) == doctest::Approx(24.05).epsilon(0.01 / 24.05));
    CHECK(psnr(base, offset(base, 16)) == doctest::Approx(20.0 * std::log10(255.0 / 16.0)).epsilon(1e-12));
    CHECK(psnr(base, base) == kPsnrCap);
    CHECK(psnr(base, base, offset(base, 16)) ==
          doctest::Approx((kPsnrCap + 20.0 * std::log10(255.0 / 16.0)) / 2).epsilon(1e-12));
    CHECK_THROWS_AS(psnr(base, constant(32, 31, 0)), Error);
  }

  TEST_CASE("ssim matches a brute-force oracle") {
    const GrayImage x = random_image(24, 20, 1);
    const GrayImage y = box_blur(x);
    CHECK(ssim(x, y) == doctest::Approx(ssim_oracle(x, y)).epsilon(1e-9));
    const PhantomPair p = generate_phantom({64, 3, 2, 0.01, 0.01});
    CHECK(ssim(p.a, p.b) == doctest::Approx(ssim_oracle(p.a, p.b)).epsilon(1e-9));
  }

  TEST_CASE("ssim properties") {
    const GrayImage x = random_image(32, 32, 2);
    CHECK(std::abs(ssim(x, x) - 1.0) < 1e-9);
    GrayImage inv = x;
    for (double& v : inv.pixels) v = 1.0 - v;
    CHECK(ssim(x, inv) < 0.0);
    const GrayImage y = box_blur(x);
    CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-14));
    CHECK(ssim(x, y) < 1.0);
    CHECK_THROWS_AS(ssim(random_image(10, 10, 1), random_image(10, 10, 2)), Error);
  }

  TEST_CASE("fmi oracles") {
    CHECK(normalized_mutual_information({0, 0, 1, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(normalized_mutual_information({0, 0, 1, 1}, {5, 5, 9, 9}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(normalized_mutual_information({0, 1, 0, 1}, {0, 0, 1, 1})) < 1e-12);
    CHECK(normalized_mutual_information({3, 3, 3}, {7, 7, 7}) == 1.0);

    ttfuse::SplitMix64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<int> x(200), y(200);
      for (int i = 0; i < 200; ++i) {
        x[i] = static_cast<int>(rng.below(12));
        y[i] = rng.below(3) == 0 ? x[i] : static_cast<int>(rng.below(12));
      }
      CHECK(normalized_mutual_information(x, y) == doctest::Approx(nmi_oracle(x, y)).epsilon(1e-12));
    }

    const GrayImage flat = constant(16, 16, 90);
    for (int bin : gradient_bins(flat)) CHECK(bin == 0);

    const GrayImage x = random_image(40, 40, 3);
    CHECK(std::abs(fmi(x, x, x) - 1.0) < 1e-9);
    CHECK(fmi(x, x, box_blur(x)) < 1.0);
  }

  TEST_CASE("fmi of independent noise is small") {
    const GrayImage a = random_image(256, 256, 10);
    const GrayImage b = random_image(256, 256, 11);
    const GrayImage f = random_image(256, 256, 12);
    const double v = fmi(f, a, b);
    MESSAGE("fmi independent noise: " << v);
    CHECK(v < 0.05);
  }

  TEST_CASE("fsim properties") {
    const PhantomPair p = generate_phantom({64, 5, 2, 0.02, 0.02});
    CHECK(std::abs(fsim(p.a, p.a) - 1.0) < 1e-9);
    CHECK(std::abs(fsim(p.a, p.a, p.a) - 1.0) < 1e-9);
    const GrayImage blurred = box_blur(p.a);
    const double f = fsim(p.a, blurred);
    CHECK(f < 1.0);
    CHECK(f > 0.5);
    CHECK(fsim(blurred, p.a) == doctest::Approx(f).epsilon(1e-12));
    CHECK(fsim(p.a, p.b) < f);
    const GrayImage flat = constant(48, 48, 128);
    CHECK(fsim(flat, flat) == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : phase_congruency(flat.pixels, 48, 48)) CHECK(std::abs(v) < 1e-9);
    CHECK_THROWS_AS(fsim(constant(16, 16, 1), constant(16, 16, 1)), Error);
  }

  TEST_CASE("entropy oracles") {
    CHECK(entropy(constant(16, 16, 77)) == 0.0);
    GrayImage ramp(256, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 256; ++x) ramp.at(x, y) = x / 255.0;
    CHECK(std::abs(entropy(ramp) - 8.0) < 1e-12);
    GrayImage halves(8, 8);
    for (int i = 0; i < 32; ++i) halves.pixels[i] = 1.0;
    CHECK(std::abs(entropy(halves) - 1.0) < 1e-12);
    const auto hist = intensity_histogram(halves);
    CHECK(hist[0] == 32.0);
    CHECK(hist[255] == 32.0);
  }

  TEST_CASE("evaluate bundles all five metrics") {
    const PhantomPair p = generate_phantom({64, 8, 1, 0.01, 0.01});
    GrayImage mean = p.a;
    for (std::size_t i = 0; i < mean.pixels.size(); ++i) mean.pixels[i] = (p.a.pixels[i] + p.b.pixels[i]) / 2;
    mean = quantize(mean);
    const MetricReport r = evaluate(mean, p.a, p.b);
    CHECK(r.psnr == psnr(mean, p.a, p.b));
    CHECK(r.ssim == ssim(mean, p.a, p.b));
    CHECK(r.fmi == fmi(mean, p.a, p.b));
    CHECK(r.fsim == fsim(mean, p.a, p.b));
    CHECK(r.en == entropy(mean));
  }
}
