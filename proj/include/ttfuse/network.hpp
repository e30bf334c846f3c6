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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ttfuse/ops.hpp"
#include "ttfuse/optim.hpp"

namespace ttfuse {

using ag::Var;

inline constexpr int kFeatureChannels = 32;
inline constexpr int kAttentionReduction = 4;
inline constexpr int kSpatialKernel = 7;
inline constexpr int kMapperHidden = 8;

enum class Modality { kA, kB };

struct NetworkConfig {
  // One encoder applied to both modalities, or one encoder per modality.
  bool shared_encoder = true;
  // Adds the trainable per-channel statistics-to-weights map.
  bool learned_mapper = false;
};

// 3x3 convolution (stride 1, same padding) followed by an activation.
struct ConvBlock {
  ConvBlock() = default;
  ConvBlock(const std::string& name, int in_channels, int out_channels,
            ops::Activation act = ops::Activation::kRelu);

  Var forward(const Var& x) const;

  Parameter weight;
  Parameter bias;
  ops::Activation act = ops::Activation::kRelu;
};

// Squeeze-excite gate: avg-pool, C -> C/4 -> C, sigmoid.
struct ChannelAttention {
  ChannelAttention() = default;
  ChannelAttention(const std::string& name, int channels);

  Var gate(const Var& x) const;
  Var forward(const Var& x) const;

  Parameter fc1_weight, fc1_bias, fc2_weight, fc2_bias;
};

// Per-pixel gate from a 7x7 conv over the channel mean and max maps.
struct SpatialAttention {
  SpatialAttention() = default;
  explicit SpatialAttention(const std::string& name);

  Var gate(const Var& x) const;
  Var forward(const Var& x) const;

  Parameter weight, bias;
};

struct ResidualAttentionBlock {
  ResidualAttentionBlock() = default;
  ResidualAttentionBlock(const std::string& name, int channels);

  Var forward(const Var& x) const;

  ConvBlock conv_in;
  ChannelAttention channel_att;
  SpatialAttention spatial_att;
  ConvBlock conv_out;
};

// (N,1,H,W) -> (N,32,H,W).
struct Encoder {
  Encoder() = default;
  explicit Encoder(const std::string& name);

  Var forward(const Var& image) const;

  ConvBlock head;
  ResidualAttentionBlock body;
  ConvBlock tail;
};

// (N,32,H,W) -> (N,1,H,W) in (0,1).
struct Decoder {
  Decoder() = default;
  explicit Decoder(const std::string& name);

  Var forward(const Var& features) const;

  ConvBlock block0, block1, block2;
};

// Per-modality 2 -> 8 -> 2 map applied to every channel's (mean, std).
// Output channel 0 is the weight logit, channel 1 the bias.
struct LearnedMapper {
  LearnedMapper() = default;
  explicit LearnedMapper(const std::string& name);

  // mean, stddev: (N,C,1,1). Returns (logit, bias), each (N,C,1,1).
  std::pair<Var, Var> forward(Modality slot, const Var& mean,
                              const Var& stddev) const;

  Parameter hidden_weight[2], hidden_bias[2], out_weight[2], out_bias[2];
};

class FusionNetwork {
 public:
  // Kaiming-uniform kernels (bound sqrt(6 / fan_in)) and zero biases, drawn
  // from one SplitMix64 stream in parameter order.
  static FusionNetwork create(const NetworkConfig& config, std::uint64_t seed);

  const NetworkConfig& config() const { return config_; }

  Var encode(const Var& image, Modality modality = Modality::kA) const;
  Var decode(const Var& features) const;

  const Encoder& encoder(Modality modality) const;
  const Decoder& decoder() const { return decoder_; }
  const LearnedMapper* mapper() const {
    return mapper_ ? &*mapper_ : nullptr;
  }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<Parameter*> encoder_parameters();
  std::vector<Parameter*> decoder_parameters();
  std::vector<Parameter*> mapper_parameters();

  void set_trainable(bool trainable);

 private:
  NetworkConfig config_;
  Encoder encoder_a_;
  std::optional<Encoder> encoder_b_;
  Decoder decoder_;
  std::optional<LearnedMapper> mapper_;
};

}  // namespace ttfuse
