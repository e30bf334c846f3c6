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

#include <vector>

#include "ttfuse/network.hpp"

namespace ttfuse {

inline constexpr double kStatsEpsilon = 1e-5;

// Per-channel population statistics of one feature map.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> variance;
  double epsilon = kStatsEpsilon;

  int channels() const { return static_cast<int>(mean.size()); }
};

// Per-channel fusion coefficients: fused = w1*a + w2*b + b1 + b2.
struct FusionParams {
  std::vector<double> w1, w2, b1, b2;
};

enum class MapperKind { kVarianceSoftmax, kLearnedAffine };

struct WeightMapper {
  MapperKind kind = MapperKind::kVarianceSoftmax;
  // Softmax temperature of the variance mapper.
  double temperature = 1.0;
  // Required for kLearnedAffine; owned by the network.
  const LearnedMapper* learned = nullptr;
};

enum class BaselineStrategy { kMean, kMax, kSum };

const char* to_string(BaselineStrategy strategy);

// --- Tensor-level API (one feature map, N == 1) ---------------------------

ChannelStats channel_stats(const Tensor& features,
                           double epsilon = kStatsEpsilon);
Tensor zscore(const Tensor& features, const ChannelStats& stats);
FusionParams map_weights(const WeightMapper& mapper, const ChannelStats& a,
                         const ChannelStats& b);
Tensor fuse(const Tensor& a_norm, const Tensor& b_norm,
            const FusionParams& params);
Tensor baseline_fuse(const Tensor& a_norm, const Tensor& b_norm,
                     BaselineStrategy strategy);

// --- Differentiable API (any N) -------------------------------------------

struct StatsVar {
  Var mean;      // (N,C,1,1)
  Var variance;  // (N,C,1,1)
};

struct ParamsVar {
  Var w1, w2, b1, b2;  // (N,C,1,1)
};

StatsVar channel_stats(const Var& features);
Var zscore(const Var& features, const StatsVar& stats, double epsilon);
ParamsVar map_weights(const WeightMapper& mapper, const StatsVar& a,
                      const StatsVar& b);
Var fuse(const Var& a_norm, const Var& b_norm, const ParamsVar& params);
Var baseline_fuse(const Var& a_norm, const Var& b_norm,
                  BaselineStrategy strategy);

// Statistics -> z-score -> weights -> weighted sum for two feature maps.
Var fuse_features(const WeightMapper& mapper, const Var& features_a,
                  const Var& features_b, double epsilon = kStatsEpsilon);

// --- Test-time adaptation and the end-to-end pipeline --------------------

// kFusion adapts everything downstream of the feature statistics (learned
// mapper, if any, and the reconstruction decoder); kFusionEncoder also adapts
// the encoder(s).
enum class AdaptScope { kFusion, kFusionEncoder };

struct TttConfig {
  int steps = 5;
  double lr = 1e-5;
  double lambda_ssim = 0.8;
  double lambda_l1 = 0.2;
  AdaptScope scope = AdaptScope::kFusion;
};

struct FusionOptions {
  MapperKind mapper = MapperKind::kVarianceSoftmax;
  double temperature = 1.0;
  double epsilon = kStatsEpsilon;
  TttConfig ttt;
};

// Source-reconstruction objective against both inputs:
// sum over m of lambda_ssim * (1 - SSIM(out, x_m)) + lambda_l1 * L1(out, x_m).
Var fusion_loss(const Var& output, const Tensor& a, const Tensor& b,
                double lambda_ssim, double lambda_l1);

struct EncodedPair {
  Tensor features_a;
  Tensor features_b;
};

EncodedPair encode_pair(const FusionNetwork& net, const Tensor& a,
                        const Tensor& b);

struct TttResult {
  FusionNetwork network;            // adapted copy
  std::vector<double> loss_trace;   // steps + 1 entries, empty for 0 steps
  Tensor image;                     // (1,1,H,W) output of the adapted model
};

// Adapts a copy of `net` to the pair (a, b) with `options.ttt.steps` Adam
// steps. `encoded` may carry precomputed features for the kFusion scope.
// Throws Error(kNumeric) on a non-finite loss.
TttResult ttt_adapt(const FusionNetwork& net, const Tensor& a, const Tensor& b,
                    const FusionOptions& options,
                    const EncodedPair* encoded = nullptr);

struct FusionOutput {
  Tensor image;  // (1,1,H,W)
  std::vector<double> loss_trace;
};

// a, b: (1,1,H,W) in [0,1].
FusionOutput fuse_pipeline(const FusionNetwork& net, const Tensor& a,
                           const Tensor& b, const FusionOptions& options,
                           const EncodedPair* encoded = nullptr);

Tensor baseline_pipeline(const FusionNetwork& net, const EncodedPair& encoded,
                         BaselineStrategy strategy);

}  // namespace ttfuse
