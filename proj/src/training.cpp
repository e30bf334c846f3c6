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

#include "ttfuse/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ttfuse/error.hpp"
#include "ttfuse/rng.hpp"

namespace ttfuse {
namespace {

Var reconstruction_loss(const FusionNetwork& net, const Tensor& image,
                        Modality modality, const TrainConfig& config) {
  Var features = net.encode(Var::constant(image), modality);
  Var normalized = zscore(features, channel_stats(features), kStatsEpsilon);
  Var output = net.decode(normalized);
  return ops::add(ops::scale(ops::ssim_loss(output, image), config.lambda_ssim),
                  ops::scale(ops::l1_loss(output, image), config.lambda_l1));
}

struct TensorPair {
  Tensor a, b;
};

double frozen_batch_loss(const FusionNetwork& net,
                         const std::vector<TensorPair>& pairs,
                         std::size_t count, const TrainConfig& config) {
  ag::NoGradGuard guard;
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    total += pair_training_loss(net, pairs[i].a, pairs[i].b, config).value()[0];
  }
  return total / static_cast<double>(count);
}

}  // namespace

LrSchedule training_schedule(const TrainConfig& config) {
  return {config.lr_max, config.lr_min, std::max(1, config.epochs - 1)};
}

Var pair_training_loss(const FusionNetwork& net, const Tensor& a,
                       const Tensor& b, const TrainConfig& config) {
  Var loss = ops::add(reconstruction_loss(net, a, Modality::kA, config),
                      reconstruction_loss(net, b, Modality::kB, config));
  if (net.mapper()) {
    const WeightMapper mapper{MapperKind::kLearnedAffine, 1.0, net.mapper()};
    Var fa = net.encode(Var::constant(a), Modality::kA);
    Var fb = net.encode(Var::constant(b), Modality::kB);
    Var fused = net.decode(fuse_features(mapper, fa, fb));
    loss = ops::add(loss, fusion_loss(fused, a, b, config.lambda_ssim,
                                      config.lambda_l1));
  }
  return loss;
}

TrainResult train(const std::vector<ImagePair>& pairs, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (pairs.empty()) {
    throw Error(ErrorKind::kEmptyDataset, "train: no training pairs");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "train: epochs and batch_size must be at least 1");
  }
  std::vector<TensorPair> data;
  data.reserve(pairs.size());
  for (const ImagePair& p : pairs) data.push_back({to_tensor(p.a), to_tensor(p.b)});

  TrainResult result{FusionNetwork::create(config.network, config.seed), {}, 0.0};
  FusionNetwork& net = result.network;
  net.set_trainable(true);
  std::vector<Parameter*> params = net.parameters();

  const std::size_t frozen_count =
      std::min(data.size(), static_cast<std::size_t>(config.batch_size));
  result.initial_frozen_loss = frozen_batch_loss(net, data, frozen_count, config);

  const LrSchedule schedule = training_schedule(config);
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.below(i + 1)]);
    }
    const double lr = cosine_lr(schedule, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const TensorPair& pair = data[order[k]];
        Var loss = pair_training_loss(net, pair.a, pair.b, config);
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
          throw Error(ErrorKind::kNumeric,
                      "train: non-finite loss at epoch " + std::to_string(epoch) +
                          ", pair " + std::to_string(order[k]) + " (lr " +
                          std::to_string(lr) + ")");
        }
        epoch_loss += value;
        ag::backward(ops::scale(loss, inv));
      }
      for (Parameter* p : params) adam_step(*p, lr);
    }
    EpochRecord record{epoch, epoch_loss / static_cast<double>(data.size()), lr,
                       frozen_batch_loss(net, data, frozen_count, config)};
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  for (Parameter* p : params) p->mutable_value().clear_grad();
  return result;
}

}  // namespace ttfuse
