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

#include "ttfuse/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ttfuse/error.hpp"
#include "ttfuse/rng.hpp"

namespace ttfuse {
namespace {

struct Ellipse {
  double cx, cy, rx, ry, angle;

  // Squared normalised radius; < 1 inside.
  double rho2(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (c * dx + s * dy) / rx;
    const double v = (-s * dx + c * dy) / ry;
    return u * u + v * v;
  }
};

struct Blob {
  double cx, cy, radius, amplitude;
};

constexpr double kRimInner = 0.86;

struct Geometry {
  Ellipse head;
  std::vector<Blob> blobs;
  std::vector<Ellipse> dense;
  std::vector<Ellipse> lesions;
};

// Random point strictly inside the head at normalised radius <= limit.
std::pair<double, double> interior_point(SplitMix64& rng, const Ellipse& head,
                                         double limit) {
  const double r = limit * std::sqrt(rng.uniform());
  const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double u = r * std::cos(t) * head.rx, v = r * std::sin(t) * head.ry;
  const double c = std::cos(head.angle), s = std::sin(head.angle);
  return {head.cx + c * u - s * v, head.cy + s * u + c * v};
}

Geometry make_geometry(const PhantomSpec& spec) {
  SplitMix64 rng(derive_seed(spec.seed, 0));
  const double n = spec.size;
  Geometry g;
  g.head = {n / 2 + rng.uniform(-0.03, 0.03) * n,
            n / 2 + rng.uniform(-0.03, 0.03) * n,
            rng.uniform(0.36, 0.42) * n, rng.uniform(0.40, 0.46) * n,
            rng.uniform(-0.2, 0.2)};
  const int blob_count = 3 + static_cast<int>(rng.below(4));
  for (int i = 0; i < blob_count; ++i) {
    const auto [x, y] = interior_point(rng, g.head, 0.6);
    g.blobs.push_back({x, y, rng.uniform(0.06, 0.14) * n, rng.uniform(0.15, 0.35)});
  }
  const int dense_count = 1 + static_cast<int>(rng.below(3));
  for (int i = 0; i < dense_count; ++i) {
    const auto [x, y] = interior_point(rng, g.head, 0.65);
    g.dense.push_back({x, y, rng.uniform(0.02, 0.05) * n,
                       rng.uniform(0.02, 0.05) * n, rng.uniform(0.0, std::numbers::pi)});
  }
  for (int i = 0; i < spec.lesion_count; ++i) {
    const auto [x, y] = interior_point(rng, g.head, 0.6);
    const double r = rng.uniform(0.03, 0.07) * n;
    g.lesions.push_back({x, y, r, r, 0.0});
  }
  return g;
}

double quantize8(double v) {
  return std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

}  // namespace

PhantomPair generate_phantom(const PhantomSpec& spec) {
  if (spec.size < kPhantomMinSize) {
    throw Error(ErrorKind::kInvalidArgument,
                "phantom size " + std::to_string(spec.size) +
                    " is below the minimum " + std::to_string(kPhantomMinSize));
  }
  if (spec.lesion_count < 0 || spec.lesion_count > kPhantomMaxLesions) {
    throw Error(ErrorKind::kInvalidArgument,
                "lesion_count must be in [0, 5], got " +
                    std::to_string(spec.lesion_count));
  }
  for (double sigma : {spec.noise_sigma_a, spec.noise_sigma_b}) {
    if (!(sigma >= 0.0 && sigma <= kPhantomMaxNoise)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "noise sigma must be in [0, 0.1], got " + std::to_string(sigma));
    }
  }

  const Geometry g = make_geometry(spec);
  const int n = spec.size;
  PhantomPair out{GrayImage(n, n), GrayImage(n, n),
                  std::vector<Region>(static_cast<std::size_t>(n) * n,
                                      Region::kBackground)};
  SplitMix64 noise_a(derive_seed(spec.seed, 1));
  SplitMix64 noise_b(derive_seed(spec.seed, 2));

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double rho2 = g.head.rho2(px, py);
      Region region = Region::kBackground;
      double a = 0.0, b = 0.0;
      if (rho2 < 1.0 && rho2 >= kRimInner * kRimInner) {
        region = Region::kRim;
        a = 0.15;
        b = 0.95;
      } else if (rho2 < kRimInner * kRimInner) {
        region = Region::kSoftTissue;
        // Bright centre falling off towards the rim.
        a = 0.40 + 0.18 * (1.0 - rho2 / (kRimInner * kRimInner));
        b = 0.30;
        double blob_sum = 0.0;
        for (const Blob& blob : g.blobs) {
          const double dx = px - blob.cx, dy = py - blob.cy;
          const double d2 = (dx * dx + dy * dy) / (blob.radius * blob.radius);
          const double weight = std::exp(-d2);
          blob_sum += blob.amplitude * weight;
          if (d2 < 0.5) region = Region::kBlob;
        }
        a += blob_sum;
        b += 0.04 * blob_sum;
        for (const Ellipse& e : g.dense) {
          if (e.rho2(px, py) < 1.0) {
            region = Region::kDense;
            a = 0.20;
            b = 0.85;
          }
        }
        for (const Ellipse& e : g.lesions) {
          if (e.rho2(px, py) < 1.0) {
            region = Region::kLesion;
            a = 0.88;
            b = 0.45;
          }
        }
      }
      const std::size_t i = static_cast<std::size_t>(y) * n + x;
      out.regions[i] = region;
      out.a.pixels[i] = quantize8(a + spec.noise_sigma_a * noise_a.normal());
      out.b.pixels[i] = quantize8(b + spec.noise_sigma_b * noise_b.normal());
    }
  }
  return out;
}

PhantomSpec corpus_phantom_spec(std::uint64_t corpus_seed, int index,
                                int size) {
  SplitMix64 rng(derive_seed(corpus_seed, static_cast<std::uint64_t>(index)));
  PhantomSpec spec;
  spec.size = size;
  spec.seed = rng.next();
  spec.lesion_count = static_cast<int>(rng.below(kPhantomMaxLesions + 1));
  spec.noise_sigma_a = rng.uniform(0.005, 0.03);
  spec.noise_sigma_b = rng.uniform(0.005, 0.03);
  return spec;
}

}  // namespace ttfuse
