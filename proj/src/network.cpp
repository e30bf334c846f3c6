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

#include "ttfuse/network.hpp"

#include <cmath>

#include "ttfuse/error.hpp"
#include "ttfuse/rng.hpp"

namespace ttfuse {
namespace {

Parameter kernel(const std::string& name, int out, int in, int k) {
  return Parameter(name + ".weight", Tensor(Shape{out, in, k, k}));
}

Parameter bias(const std::string& name, int out) {
  return Parameter(name + ".bias", Tensor(Shape{1, out, 1, 1}));
}

}  // namespace

ConvBlock::ConvBlock(const std::string& name, int in_channels,
                     int out_channels, ops::Activation act)
    : weight(kernel(name, out_channels, in_channels, 3)),
      bias(ttfuse::bias(name, out_channels)),
      act(act) {}

Var ConvBlock::forward(const Var& x) const {
  return ops::activation(ops::conv2d_same(x, weight.var(), bias.var()), act);
}

ChannelAttention::ChannelAttention(const std::string& name, int channels)
    : fc1_weight(kernel(name + ".fc1", channels / kAttentionReduction, channels, 1)),
      fc1_bias(bias(name + ".fc1", channels / kAttentionReduction)),
      fc2_weight(kernel(name + ".fc2", channels, channels / kAttentionReduction, 1)),
      fc2_bias(bias(name + ".fc2", channels)) {}

Var ChannelAttention::gate(const Var& x) const {
  Var squeezed = ops::reduce(x, ops::Reduction::kGlobalAvgPerChannel);
  Var hidden = ops::relu(
      ops::conv2d(squeezed, fc1_weight.var(), fc1_bias.var(), 1, 0));
  return ops::sigmoid(ops::conv2d(hidden, fc2_weight.var(), fc2_bias.var(), 1, 0));
}

Var ChannelAttention::forward(const Var& x) const {
  return ops::mul_channel(x, gate(x));
}

SpatialAttention::SpatialAttention(const std::string& name)
    : weight(kernel(name, 1, 2, kSpatialKernel)), bias(ttfuse::bias(name, 1)) {}

Var SpatialAttention::gate(const Var& x) const {
  Var pooled = ops::concat_channels(
      ops::reduce(x, ops::Reduction::kChannelMeanMap),
      ops::reduce(x, ops::Reduction::kChannelMaxMap));
  return ops::sigmoid(ops::conv2d_same(pooled, weight.var(), bias.var()));
}

Var SpatialAttention::forward(const Var& x) const {
  return ops::mul_spatial(x, gate(x));
}

ResidualAttentionBlock::ResidualAttentionBlock(const std::string& name,
                                               int channels)
    : conv_in(name + ".conv_in", channels, channels),
      channel_att(name + ".channel_att", channels),
      spatial_att(name + ".spatial_att"),
      conv_out(name + ".conv_out", channels, channels) {}

Var ResidualAttentionBlock::forward(const Var& x) const {
  Var y = conv_in.forward(x);
  y = channel_att.forward(y);
  y = spatial_att.forward(y);
  y = conv_out.forward(y);
  return ops::add(x, y);
}

Encoder::Encoder(const std::string& name)
    : head(name + ".head", 1, 16),
      body(name + ".body", 16),
      tail(name + ".tail", 16, kFeatureChannels) {}

Var Encoder::forward(const Var& image) const {
  return tail.forward(body.forward(head.forward(image)));
}

Decoder::Decoder(const std::string& name)
    : block0(name + ".block0", kFeatureChannels, 16),
      block1(name + ".block1", 16, 8),
      block2(name + ".block2", 8, 1, ops::Activation::kSigmoid) {}

Var Decoder::forward(const Var& features) const {
  return block2.forward(block1.forward(block0.forward(features)));
}

LearnedMapper::LearnedMapper(const std::string& name) {
  for (int slot = 0; slot < 2; ++slot) {
    const std::string prefix = name + (slot == 0 ? ".a" : ".b");
    hidden_weight[slot] = kernel(prefix + ".hidden", kMapperHidden, 2, 1);
    hidden_bias[slot] = bias(prefix + ".hidden", kMapperHidden);
    out_weight[slot] = kernel(prefix + ".out", 2, kMapperHidden, 1);
    out_bias[slot] = bias(prefix + ".out", 2);
  }
}

std::pair<Var, Var> LearnedMapper::forward(Modality slot, const Var& mean,
                                           const Var& stddev) const {
  const int s = slot == Modality::kA ? 0 : 1;
  const Shape stats = mean.shape();
  // Channels laid out spatially; the 1x1 convs act per channel.
  const Shape column{stats.n, 1, stats.c, 1};
  Var features = ops::concat_channels(ops::reshape(mean, column),
                                      ops::reshape(stddev, column));
  Var hidden = ops::relu(ops::conv2d(features, hidden_weight[s].var(),
                                     hidden_bias[s].var(), 1, 0));
  Var out = ops::conv2d(hidden, out_weight[s].var(), out_bias[s].var(), 1, 0);
  return {ops::reshape(ops::slice_channels(out, 0, 1), stats),
          ops::reshape(ops::slice_channels(out, 1, 1), stats)};
}

FusionNetwork FusionNetwork::create(const NetworkConfig& config,
                                    std::uint64_t seed) {
  FusionNetwork net;
  net.config_ = config;
  net.encoder_a_ = Encoder("encoder");
  if (!config.shared_encoder) net.encoder_b_ = Encoder("encoder_b");
  net.decoder_ = Decoder("decoder");
  if (config.learned_mapper) net.mapper_ = LearnedMapper("mapper");

  SplitMix64 rng(seed);
  for (Parameter* p : net.parameters()) {
    Tensor& value = p->mutable_value();
    const Shape& s = value.shape();
    const bool is_bias = p->name().ends_with(".bias");
    if (is_bias) continue;
    const double fan_in = static_cast<double>(s.c) * s.h * s.w;
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : value.data()) v = rng.uniform(-bound, bound);
  }
  return net;
}

Var FusionNetwork::encode(const Var& image, Modality modality) const {
  if (image.shape().c != 1) {
    throw Error(ErrorKind::kShapeMismatch,
                "encode: expected a single-channel image, got " +
                    image.shape().str());
  }
  return encoder(modality).forward(image);
}

Var FusionNetwork::decode(const Var& features) const {
  if (features.shape().c != kFeatureChannels) {
    throw Error(ErrorKind::kShapeMismatch,
                "decode: expected " + std::to_string(kFeatureChannels) +
                    " feature channels, got " + features.shape().str());
  }
  return decoder_.forward(features);
}

const Encoder& FusionNetwork::encoder(Modality modality) const {
  return (modality == Modality::kB && encoder_b_) ? *encoder_b_ : encoder_a_;
}

namespace {

void collect(ConvBlock& b, std::vector<Parameter*>& out) {
  out.push_back(&b.weight);
  out.push_back(&b.bias);
}

void collect(Encoder& e, std::vector<Parameter*>& out) {
  collect(e.head, out);
  collect(e.body.conv_in, out);
  auto& ca = e.body.channel_att;
  for (Parameter* p : {&ca.fc1_weight, &ca.fc1_bias, &ca.fc2_weight, &ca.fc2_bias}) {
    out.push_back(p);
  }
  out.push_back(&e.body.spatial_att.weight);
  out.push_back(&e.body.spatial_att.bias);
  collect(e.body.conv_out, out);
  collect(e.tail, out);
}

}  // namespace

std::vector<Parameter*> FusionNetwork::encoder_parameters() {
  std::vector<Parameter*> out;
  collect(encoder_a_, out);
  if (encoder_b_) collect(*encoder_b_, out);
  return out;
}

std::vector<Parameter*> FusionNetwork::decoder_parameters() {
  std::vector<Parameter*> out;
  collect(decoder_.block0, out);
  collect(decoder_.block1, out);
  collect(decoder_.block2, out);
  return out;
}

std::vector<Parameter*> FusionNetwork::mapper_parameters() {
  std::vector<Parameter*> out;
  if (!mapper_) return out;
  for (int s = 0; s < 2; ++s) {
    out.push_back(&mapper_->hidden_weight[s]);
    out.push_back(&mapper_->hidden_bias[s]);
    out.push_back(&mapper_->out_weight[s]);
    out.push_back(&mapper_->out_bias[s]);
  }
  return out;
}

std::vector<Parameter*> FusionNetwork::parameters() {
  std::vector<Parameter*> out = encoder_parameters();
  for (Parameter* p : decoder_parameters()) out.push_back(p);
  for (Parameter* p : mapper_parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> FusionNetwork::parameters() const {
  auto mutable_params = const_cast<FusionNetwork*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

void FusionNetwork::set_trainable(bool trainable) {
  for (Parameter* p : parameters()) p->set_trainable(trainable);
}

}  // namespace ttfuse
