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

#include "ttfuse/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "ttfuse/error.hpp"
#include "ttfuse/rng.hpp"

namespace ttfuse {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr BaselineStrategy kBaselines[] = {BaselineStrategy::kMean,
                                           BaselineStrategy::kMax,
                                           BaselineStrategy::kSum};

struct MethodResult {
  std::string method;
  MetricReport report;
  double seconds = 0.0;
};

std::vector<MethodResult> score_pair(const FusionNetwork& net,
                                     const ImagePair& pair,
                                     const FusionOptions& fusion,
                                     bool baselines) {
  std::vector<MethodResult> out;
  const FusedPair fused = fuse_images(net, pair.a, pair.b, fusion);
  out.push_back({kTttMethod, evaluate(fused.luma, pair.a, pair.b), fused.seconds});
  if (baselines) {
    for (BaselineStrategy s : kBaselines) {
      const auto start = Clock::now();
      const EncodedPair encoded =
          encode_pair(net, to_tensor(pair.a), to_tensor(pair.b));
      const GrayImage luma = quantize(to_image(baseline_pipeline(net, encoded, s)));
      const double seconds = seconds_since(start);
      out.push_back({baseline_method(s), evaluate(luma, pair.a, pair.b), seconds});
    }
  }
  return out;
}

MetricReport add(MetricReport a, const MetricReport& b, double scale = 1.0) {
  a.psnr += scale * b.psnr;
  a.ssim += scale * b.ssim;
  a.fmi += scale * b.fmi;
  a.fsim += scale * b.fsim;
  a.en += scale * b.en;
  return a;
}

MetricReport squared_deviation(const MetricReport& x, const MetricReport& mean) {
  auto sq = [](double v) { return v * v; };
  return {sq(x.psnr - mean.psnr), sq(x.ssim - mean.ssim), sq(x.fmi - mean.fmi),
          sq(x.fsim - mean.fsim), sq(x.en - mean.en)};
}

MetricReport sqrt_of(MetricReport r) {
  r.psnr = std::sqrt(r.psnr);
  r.ssim = std::sqrt(r.ssim);
  r.fmi = std::sqrt(r.fmi);
  r.fsim = std::sqrt(r.fsim);
  r.en = std::sqrt(r.en);
  return r;
}

}  // namespace

int default_worker_count() {
  if (const char* env = std::getenv("TTFUSE_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t threads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string baseline_method(BaselineStrategy strategy) {
  return std::string("sfnn_") + to_string(strategy);
}

FusedPair fuse_images(const FusionNetwork& net, const GrayImage& a,
                      const GrayImage& b, const FusionOptions& options) {
  const auto start = Clock::now();
  FusionOutput out = fuse_pipeline(net, to_tensor(a), to_tensor(b), options);
  FusedPair result;
  result.luma = quantize(to_image(out.image));
  result.loss_trace = std::move(out.loss_trace);
  result.seconds = seconds_since(start);
  return result;
}

EvalResult evaluate_dataset(const FusionNetwork& net, const PairDataset& dataset,
                            const FusionOptions& fusion,
                            const EvalSettings& settings, int workers) {
  if (settings.repeats < 1) {
    throw Error(ErrorKind::kInvalidArgument, "eval: repeats must be at least 1");
  }
  if (settings.test_count < 1) {
    throw Error(ErrorKind::kEmptyDataset, "eval: empty test split");
  }
  std::vector<Split> splits;
  std::set<std::size_t> needed;
  for (int r = 0; r < settings.repeats; ++r) {
    splits.push_back(split(dataset.size(), static_cast<std::size_t>(settings.test_count),
                           derive_seed(settings.seed, static_cast<std::uint64_t>(r))));
    needed.insert(splits.back().test.begin(), splits.back().test.end());
  }
  // A pair drawn by several repeats is fused once; results are pure.
  const std::vector<std::size_t> indices(needed.begin(), needed.end());
  std::vector<std::vector<MethodResult>> per_pair(indices.size());
  parallel_for(indices.size(), workers, [&](std::size_t k) {
    const ImagePair pair = load_pair(dataset.pairs()[indices[k]]);
    per_pair[k] = score_pair(net, pair, fusion, settings.baselines);
  });
  std::map<std::size_t, const std::vector<MethodResult>*> by_index;
  for (std::size_t k = 0; k < indices.size(); ++k) by_index[indices[k]] = &per_pair[k];

  EvalResult result;
  std::map<std::string, std::vector<MetricReport>> repeat_means;
  std::map<std::string, std::pair<double, int>> timing;
  for (int r = 0; r < settings.repeats; ++r) {
    std::map<std::string, MetricReport> sums;
    for (std::size_t index : splits[r].test) {
      for (const MethodResult& m : *by_index.at(index)) {
        result.scores.push_back(
            {r, dataset.pairs()[index].name, m.method, m.report, m.seconds});
        sums[m.method] = add(sums[m.method], m.report);
        auto& [total, count] = timing[m.method];
        total += m.seconds;
        ++count;
      }
    }
    for (const auto& [method, sum] : sums) {
      repeat_means[method].push_back(
          add(MetricReport{}, sum, 1.0 / static_cast<double>(splits[r].test.size())));
    }
  }
  for (const auto& [method, means] : repeat_means) {
    MethodSummary summary;
    summary.method = method;
    for (const auto& m : means) summary.mean = add(summary.mean, m);
    summary.mean = add(MetricReport{}, summary.mean, 1.0 / static_cast<double>(means.size()));
    if (means.size() > 1) {
      MetricReport var;
      for (const auto& m : means) var = add(var, squared_deviation(m, summary.mean));
      summary.stddev =
          sqrt_of(add(MetricReport{}, var, 1.0 / static_cast<double>(means.size() - 1)));
    }
    const auto& [total, count] = timing[method];
    summary.seconds_per_pair = total / count;
    result.summary.push_back(summary);
  }
  return result;
}

std::string results_csv(const std::string& dataset_name, const EvalResult& result,
                        bool with_timing) {
  std::string out =
      "dataset,method,psnr_mean,psnr_std,ssim_mean,ssim_std,fmi_mean,fmi_std,"
      "fsim_mean,fsim_std,en_mean,en_std";
  out += with_timing ? ",seconds_per_pair\n" : "\n";
  char buf[512];
  for (const MethodSummary& s : result.summary) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f",
                  dataset_name.c_str(), s.method.c_str(), s.mean.psnr, s.stddev.psnr,
                  s.mean.ssim, s.stddev.ssim, s.mean.fmi, s.stddev.fmi, s.mean.fsim,
                  s.stddev.fsim, s.mean.en, s.stddev.en);
    out += buf;
    if (with_timing) {
      std::snprintf(buf, sizeof(buf), ",%.6f", s.seconds_per_pair);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string scores_csv(const EvalResult& result) {
  std::string out = "repeat,pair,method,psnr,ssim,fmi,fsim,en\n";
  char buf[512];
  for (const PairScore& s : result.scores) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", s.repeat,
                  s.pair.c_str(), s.method.c_str(), s.report.psnr, s.report.ssim,
                  s.report.fmi, s.report.fsim, s.report.en);
    out += buf;
  }
  return out;
}

}  // namespace ttfuse
