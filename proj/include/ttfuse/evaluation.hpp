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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ttfuse/config.hpp"
#include "ttfuse/dataset.hpp"
#include "ttfuse/fusion.hpp"
#include "ttfuse/metrics.hpp"

namespace ttfuse {

// Worker count from TTFUSE_THREADS, else the hardware concurrency.
int default_worker_count();

// Runs fn(i) for i in [0, n) on up to `workers` threads. If any call throws,
// the exception of the lowest index is rethrown after all workers finish.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

inline constexpr const char* kTttMethod = "tttfusion";

// "sfnn_mean" etc.
std::string baseline_method(BaselineStrategy strategy);

struct FusedPair {
  GrayImage luma;  // quantized to 8 bits
  std::vector<double> loss_trace;
  double seconds = 0.0;
};

// The adaptive fusion of one pair, with the result quantized to 8 bits.
FusedPair fuse_images(const FusionNetwork& net, const GrayImage& a,
                      const GrayImage& b, const FusionOptions& options);

struct PairScore {
  int repeat = 0;
  std::string pair;
  std::string method;
  MetricReport report;
  double seconds = 0.0;
};

struct MethodSummary {
  std::string method;
  MetricReport mean;
  MetricReport stddev;  // sample std over repeats; 0 for one repeat
  double seconds_per_pair = 0.0;
};

struct EvalResult {
  std::vector<PairScore> scores;      // by repeat, pair, method
  std::vector<MethodSummary> summary;  // sorted by method name
};

// For every repeat r, draws split(size, test_count, derive_seed(seed, r)),
// fuses each test pair with every method and scores it. Per-repeat means are
// aggregated into mean and sample std across repeats.
EvalResult evaluate_dataset(const FusionNetwork& net, const PairDataset& dataset,
                            const FusionOptions& fusion,
                            const EvalSettings& settings, int workers);

// dataset,method,psnr_mean,psnr_std,...,en_mean,en_std[,seconds_per_pair]
std::string results_csv(const std::string& dataset_name, const EvalResult& result,
                        bool with_timing);
// repeat,pair,method,psnr,ssim,fmi,fsim,en
std::string scores_csv(const EvalResult& result);

}  // namespace ttfuse
