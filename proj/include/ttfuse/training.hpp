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
#include <functional>
#include <vector>

#include "ttfuse/dataset.hpp"
#include "ttfuse/fusion.hpp"
#include "ttfuse/network.hpp"
#include "ttfuse/optim.hpp"

namespace ttfuse {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 4;
  double lr_max = 1e-4;
  double lr_min = 3e-7;
  std::uint64_t seed = 0;
  double lambda_ssim = 0.8;
  double lambda_l1 = 0.2;
  NetworkConfig network;
};

// The schedule used by train(): lr_max at the first epoch, lr_min at the
// last.
LrSchedule training_schedule(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;         // mean per-pair loss over the epoch
  double lr = 0.0;
  double frozen_loss = 0.0;  // fixed first batch, after the epoch
};

struct TrainResult {
  FusionNetwork network;
  std::vector<EpochRecord> log;
  double initial_frozen_loss = 0.0;
};

// Self-reconstruction loss of one pair: each image goes through its encoder,
// per-channel z-scoring and the decoder, and is scored with
// lambda_ssim * (1 - SSIM) + lambda_l1 * L1. Networks with a learned mapper
// add the fusion objective of the pair.
Var pair_training_loss(const FusionNetwork& net, const Tensor& a,
                       const Tensor& b, const TrainConfig& config);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Throws kEmptyDataset for no pairs, kNumeric on a non-finite loss.
TrainResult train(const std::vector<ImagePair>& pairs, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace ttfuse
