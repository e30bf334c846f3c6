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

#include "ttfuse/fusion.hpp"

#include <cmath>
#include <string>

#include "ttfuse/error.hpp"

namespace ttfuse {
namespace {

void require_single_map(const std::string& op, const Tensor& t) {
  if (t.shape().n != 1) {
    throw Error(ErrorKind::kShapeMismatch,
                op + ": expected one feature map (N = 1), got " +
                    t.shape().str());
  }
}

Tensor per_channel(const std::vector<double>& values) {
  return Tensor(Shape{1, static_cast<int>(values.size()), 1, 1}, values);
}

std::vector<double> to_vector(const Var& v) {
  return {v.value().data().begin(), v.value().data().end()};
}

StatsVar stats_var(const ChannelStats& s) {
  return {Var::constant(per_channel(s.mean)),
          Var::constant(per_channel(s.variance))};
}

Tensor copy_of(const Tensor& t) {
  return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

}  // namespace

const char* to_string(BaselineStrategy strategy) {
  switch (strategy) {
    case BaselineStrategy::kMean: return "mean";
    case BaselineStrategy::kMax: return "max";
    case BaselineStrategy::kSum: return "sum";
  }
  return "?";
}

// ---------------------------------------------------------------------------

StatsVar channel_stats(const Var& features) {
  const Shape s = features.shape();
  if (s.h * s.w < 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "channel_stats: empty spatial extent in " + s.str());
  }
  Var mean = ops::reduce(features, ops::Reduction::kGlobalAvgPerChannel);
  Var centered = ops::sub_channel(features, mean);
  Var variance = ops::reduce(ops::square(centered),
                             ops::Reduction::kGlobalAvgPerChannel);
  return {mean, variance};
}

Var zscore(const Var& features, const StatsVar& stats, double epsilon) {
  const Shape s = features.shape();
  if (stats.mean.shape() != Shape{s.n, s.c, 1, 1}) {
    throw Error(ErrorKind::kShapeMismatch,
                "zscore: statistics " + stats.mean.shape().str() +
                    " do not match features " + s.str());
  }
  Var denom = ops::add_scalar(ops::sqrt(stats.variance), epsilon);
  return ops::div_channel(ops::sub_channel(features, stats.mean), denom);
}

ParamsVar map_weights(const WeightMapper& mapper, const StatsVar& a,
                      const StatsVar& b) {
  if (a.mean.shape() != b.mean.shape()) {
    throw Error(ErrorKind::kShapeMismatch,
                "map_weights: statistics " + a.mean.shape().str() + " and " +
                    b.mean.shape().str() + " differ in channel count");
  }
  Var std_a = ops::sqrt(a.variance);
  Var std_b = ops::sqrt(b.variance);
  if (mapper.kind == MapperKind::kVarianceSoftmax) {
    Var zeros = Var::constant(Tensor(a.mean.shape()));
    return {ops::pair_softmax(std_a, std_b, mapper.temperature),
            ops::pair_softmax(std_b, std_a, mapper.temperature), zeros, zeros};
  }
  if (mapper.learned == nullptr) {
    throw Error(ErrorKind::kInvalidArgument,
                "map_weights: learned mapper requested but the network has none");
  }
  auto [logit_a, bias_a] = mapper.learned->forward(Modality::kA, a.mean, std_a);
  auto [logit_b, bias_b] = mapper.learned->forward(Modality::kB, b.mean, std_b);
  return {ops::pair_softmax(logit_a, logit_b, 1.0),
          ops::pair_softmax(logit_b, logit_a, 1.0), bias_a, bias_b};
}

Var fuse(const Var& a_norm, const Var& b_norm, const ParamsVar& params) {
  return ops::weighted_fuse(a_norm, b_norm, params.w1, params.w2, params.b1,
                            params.b2);
}

Var baseline_fuse(const Var& a_norm, const Var& b_norm,
                  BaselineStrategy strategy) {
  switch (strategy) {
    case BaselineStrategy::kMean:
      return ops::scale(ops::add(a_norm, b_norm), 0.5);
    case BaselineStrategy::kMax:
      return ops::maximum(a_norm, b_norm);
    case BaselineStrategy::kSum:
      return ops::add(a_norm, b_norm);
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown baseline strategy");
}

Var fuse_features(const WeightMapper& mapper, const Var& features_a,
                  const Var& features_b, double epsilon) {
  if (features_a.shape() != features_b.shape()) {
    throw Error(ErrorKind::kShapeMismatch,
                "fuse: feature maps " + features_a.shape().str() + " and " +
                    features_b.shape().str() + " differ");
  }
  const StatsVar sa = channel_stats(features_a);
  const StatsVar sb = channel_stats(features_b);
  Var na = zscore(features_a, sa, epsilon);
  Var nb = zscore(features_b, sb, epsilon);
  return fuse(na, nb, map_weights(mapper, sa, sb));
}

// ---------------------------------------------------------------------------

ChannelStats channel_stats(const Tensor& features, double epsilon) {
  require_single_map("channel_stats", features);
  ag::NoGradGuard guard;
  const StatsVar s = channel_stats(Var::constant(copy_of(features)));
  return {to_vector(s.mean), to_vector(s.variance), epsilon};
}

Tensor zscore(const Tensor& features, const ChannelStats& stats) {
  require_single_map("zscore", features);
  if (stats.channels() != features.shape().c ||
      stats.variance.size() != stats.mean.size()) {
    throw Error(ErrorKind::kShapeMismatch,
                "zscore: statistics for " + std::to_string(stats.channels()) +
                    " channels applied to " + features.shape().str());
  }
  ag::NoGradGuard guard;
  return zscore(Var::constant(copy_of(features)), stats_var(stats),
                stats.epsilon)
      .value();
}

FusionParams map_weights(const WeightMapper& mapper, const ChannelStats& a,
                         const ChannelStats& b) {
  if (a.channels() != b.channels()) {
    throw Error(ErrorKind::kShapeMismatch,
                "map_weights: " + std::to_string(a.channels()) + " vs " +
                    std::to_string(b.channels()) + " channels");
  }
  ag::NoGradGuard guard;
  const ParamsVar p = map_weights(mapper, stats_var(a), stats_var(b));
  return {to_vector(p.w1), to_vector(p.w2), to_vector(p.b1), to_vector(p.b2)};
}

Tensor fuse(const Tensor& a_norm, const Tensor& b_norm,
            const FusionParams& params) {
  require_single_map("fuse", a_norm);
  if (a_norm.shape() != b_norm.shape()) {
    throw Error(ErrorKind::kShapeMismatch,
                "fuse: feature maps " + a_norm.shape().str() + " and " +
                    b_norm.shape().str() + " differ");
  }
  const std::size_t c = a_norm.shape().c;
  for (const auto* v : {&params.w1, &params.w2, &params.b1, &params.b2}) {
    if (v->size() != c) {
      throw Error(ErrorKind::kShapeMismatch,
                  "fuse: fusion parameters have " + std::to_string(v->size()) +
                      " channels, features have " + std::to_string(c));
    }
  }
  ag::NoGradGuard guard;
  const ParamsVar p{Var::constant(per_channel(params.w1)),
                    Var::constant(per_channel(params.w2)),
                    Var::constant(per_channel(params.b1)),
                    Var::constant(per_channel(params.b2))};
  return fuse(Var::constant(copy_of(a_norm)), Var::constant(copy_of(b_norm)), p)
      .value();
}

Tensor baseline_fuse(const Tensor& a_norm, const Tensor& b_norm,
                     BaselineStrategy strategy) {
  ag::NoGradGuard guard;
  return baseline_fuse(Var::constant(copy_of(a_norm)),
                       Var::constant(copy_of(b_norm)), strategy)
      .value();
}

// ---------------------------------------------------------------------------

Var fusion_loss(const Var& output, const Tensor& a, const Tensor& b,
                double lambda_ssim, double lambda_l1) {
  Var total;
  for (const Tensor* source : {&a, &b}) {
    Var term = ops::add(ops::scale(ops::ssim_loss(output, *source), lambda_ssim),
                        ops::scale(ops::l1_loss(output, *source), lambda_l1));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

namespace {

void check_pair(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::kShapeMismatch,
                "fusion pair has mismatched sizes " + a.shape().str() +
                    " and " + b.shape().str());
  }
  if (a.shape().n != 1 || a.shape().c != 1) {
    throw Error(ErrorKind::kShapeMismatch,
                "fusion inputs must be single grayscale images, got " +
                    a.shape().str());
  }
}

WeightMapper mapper_for(const FusionNetwork& net, const FusionOptions& options) {
  WeightMapper mapper{options.mapper, options.temperature, net.mapper()};
  if (options.mapper == MapperKind::kLearnedAffine && !net.mapper()) {
    throw Error(ErrorKind::kInvalidArgument,
                "learned mapper requested but the checkpoint has none");
  }
  return mapper;
}

}  // namespace

EncodedPair encode_pair(const FusionNetwork& net, const Tensor& a,
                        const Tensor& b) {
  check_pair(a, b);
  ag::NoGradGuard guard;
  return {net.encode(Var::constant(copy_of(a)), Modality::kA).value(),
          net.encode(Var::constant(copy_of(b)), Modality::kB).value()};
}

TttResult ttt_adapt(const FusionNetwork& net, const Tensor& a, const Tensor& b,
                    const FusionOptions& options, const EncodedPair* encoded) {
  check_pair(a, b);
  const TttConfig& cfg = options.ttt;
  if (cfg.steps < 0 || !(cfg.lr > 0.0) || cfg.lambda_ssim < 0.0 ||
      cfg.lambda_l1 < 0.0) {
    throw Error(ErrorKind::kInvalidArgument,
                "ttt: steps and loss weights must be non-negative, lr positive");
  }

  TttResult result{net, {}, {}};
  FusionNetwork& adapted = result.network;
  const WeightMapper mapper = mapper_for(adapted, options);
  adapted.set_trainable(false);
  std::vector<Parameter*> scope = adapted.decoder_parameters();
  for (Parameter* p : adapted.mapper_parameters()) scope.push_back(p);
  if (cfg.scope == AdaptScope::kFusionEncoder) {
    for (Parameter* p : adapted.encoder_parameters()) scope.push_back(p);
  }
  for (Parameter* p : scope) p->set_trainable(true);

  const bool encoder_frozen = cfg.scope == AdaptScope::kFusion;
  EncodedPair cached;
  if (encoder_frozen) {
    cached = encoded ? *encoded : encode_pair(adapted, a, b);
  }
  const Var image_a = Var::constant(copy_of(a));
  const Var image_b = Var::constant(copy_of(b));

  auto forward = [&]() {
    Var fa, fb;
    if (encoder_frozen) {
      fa = Var::constant(copy_of(cached.features_a));
      fb = Var::constant(copy_of(cached.features_b));
    } else {
      fa = adapted.encode(image_a, Modality::kA);
      fb = adapted.encode(image_b, Modality::kB);
    }
    return adapted.decode(fuse_features(mapper, fa, fb, options.epsilon));
  };

  if (cfg.steps == 0) {
    ag::NoGradGuard guard;
    result.image = forward().value();
    return result;
  }

  for (int step = 0;; ++step) {
    Var output = forward();
    Var loss = fusion_loss(output, a, b, cfg.lambda_ssim, cfg.lambda_l1);
    const double value = loss.value()[0];
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::kNumeric,
                  "ttt: non-finite adaptation loss at step " +
                      std::to_string(step));
    }
    result.loss_trace.push_back(value);
    if (step == cfg.steps) {
      result.image = output.value();
      break;
    }
    ag::backward(loss);
    for (Parameter* p : scope) adam_step(*p, cfg.lr);
  }
  result.image.clear_grad();
  result.image.set_requires_grad(false);
  return result;
}

FusionOutput fuse_pipeline(const FusionNetwork& net, const Tensor& a,
                           const Tensor& b, const FusionOptions& options,
                           const EncodedPair* encoded) {
  check_pair(a, b);
  if (options.ttt.steps < 0) {
    throw Error(ErrorKind::kInvalidArgument, "ttt: steps must be non-negative");
  }
  if (options.ttt.steps > 0) {
    TttResult adapted = ttt_adapt(net, a, b, options, encoded);
    return {std::move(adapted.image), std::move(adapted.loss_trace)};
  }
  const WeightMapper mapper = mapper_for(net, options);
  ag::NoGradGuard guard;
  const EncodedPair features = encoded ? *encoded : encode_pair(net, a, b);
  Var fused = fuse_features(mapper, Var::constant(copy_of(features.features_a)),
                            Var::constant(copy_of(features.features_b)),
                            options.epsilon);
  return {net.decode(fused).value(), {}};
}

Tensor baseline_pipeline(const FusionNetwork& net, const EncodedPair& encoded,
                         BaselineStrategy strategy) {
  ag::NoGradGuard guard;
  Var fa = Var::constant(copy_of(encoded.features_a));
  Var fb = Var::constant(copy_of(encoded.features_b));
  Var na = zscore(fa, channel_stats(fa), kStatsEpsilon);
  Var nb = zscore(fb, channel_stats(fb), kStatsEpsilon);
  return net.decode(baseline_fuse(na, nb, strategy)).value();
}

}  // namespace ttfuse
