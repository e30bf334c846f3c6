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

// ttfuse command-line tool: phantom generation, training, fusion, evaluation
// and strategy benchmarking.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ttfuse/checkpoint.hpp"
#include "ttfuse/config.hpp"
#include "ttfuse/dataset.hpp"
#include "ttfuse/error.hpp"
#include "ttfuse/evaluation.hpp"
#include "ttfuse/training.hpp"

namespace fs = std::filesystem;
using namespace ttfuse;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

void echo_config(const RunConfig& config) {
  std::cerr << "# effective configuration\n" << describe(config);
}

RunConfig config_with_dataset(const fs::path& path) {
  RunConfig config = load_run_config(path);
  if (config.dataset_root.empty()) {
    throw Error(ErrorKind::kConfig, path.string() + ": dataset.root is required");
  }
  return config;
}

std::string dataset_name(const RunConfig& config) {
  const fs::path root = config.dataset_root.lexically_normal();
  const std::string name =
      (root.has_filename() ? root.filename() : root.parent_path().filename()).string();
  return name.empty() ? "dataset" : name;
}

int cmd_generate(const fs::path& out, int count, int size, std::uint64_t seed) {
  write_phantom_corpus(out, count, size, seed);
  std::cout << "wrote " << count << " phantom pairs (" << size << "x" << size
            << ") to " << out.string() << "\n";
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& out) {
  const RunConfig config = config_with_dataset(config_path);
  echo_config(config);
  const PairDataset dataset = PairDataset::open(config.dataset_root);
  std::vector<ImagePair> pairs;
  pairs.reserve(dataset.size());
  for (const PairEntry& entry : dataset.pairs()) pairs.push_back(load_pair(entry));

  std::string log = "epoch,loss,lr,frozen_loss\n";
  const TrainResult result = train(pairs, config.train, [&](const EpochRecord& e) {
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", e.epoch, e.loss, e.lr,
                  e.frozen_loss);
    log += line;
    std::cerr << "epoch " << e.epoch << " loss " << e.loss << " lr " << e.lr << "\n";
  });
  save_checkpoint(to_checkpoint(result.network), out);
  fs::path log_path = out;
  log_path.replace_extension(".loss.csv");
  write_text(log_path, log);
  std::cout << "saved " << out.string() << " and " << log_path.string() << "\n";
  return 0;
}

int cmd_fuse(const fs::path& ckpt, const fs::path& a_path, const fs::path& b_path,
             const fs::path& out, std::optional<int> steps,
             std::optional<double> lr, const std::string& mapper) {
  const FusionNetwork net = network_from_checkpoint(load_checkpoint(ckpt));
  FusionOptions options;
  if (steps) options.ttt.steps = *steps;
  if (lr) options.ttt.lr = *lr;
  options.mapper =
      mapper == "learned" ? MapperKind::kLearnedAffine : MapperKind::kVarianceSoftmax;
  const ImagePair pair = load_pair({out.filename().string(), a_path, b_path});
  const FusedPair fused = fuse_images(net, pair.a, pair.b, options);
  if (pair.chroma) {
    save_image(out, merge_luma(fused.luma, *pair.chroma));
  } else {
    save_image(out, fused.luma);
  }
  if (steps) {
    for (std::size_t k = 0; k < fused.loss_trace.size(); ++k) {
      std::printf("step %zu loss %.17g\n", k, fused.loss_trace[k]);
    }
  }
  return 0;
}

int cmd_eval(const fs::path& ckpt, const fs::path& config_path, const fs::path& out,
             const std::string& scores_path, bool bench) {
  RunConfig config = config_with_dataset(config_path);
  if (bench) config.eval.baselines = true;
  echo_config(config);
  const FusionNetwork net = network_from_checkpoint(load_checkpoint(ckpt));
  const PairDataset dataset = PairDataset::open(config.dataset_root);
  const EvalResult result = evaluate_dataset(net, dataset, config.fusion, config.eval,
                                             default_worker_count());
  write_text(out, results_csv(dataset_name(config), result, bench));
  if (!scores_path.empty()) write_text(scores_path, scores_csv(result));
  std::cout << results_csv(dataset_name(config), result, bench);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ttfuse: multimodal medical image fusion with test-time adaptation"};
  app.require_subcommand(1);

  fs::path out, config, ckpt, a_path, b_path;
  int count = 0, size = 128;
  std::uint64_t seed = 0;
  std::optional<int> steps;
  std::optional<double> lr;
  std::string mapper = "variance_softmax";
  std::string scores;

  auto* gen = app.add_subcommand("generate-phantoms", "write a synthetic paired corpus");
  gen->add_option("--out", out, "output dataset root")->required();
  gen->add_option("--count", count, "number of pairs")->required();
  gen->add_option("--size", size, "image side in pixels")->capture_default_str();
  gen->add_option("--seed", seed, "corpus seed")->capture_default_str();

  auto* trn = app.add_subcommand("train", "train the autoencoder");
  trn->add_option("--config", config, "run configuration file")->required();
  trn->add_option("--out", out, "checkpoint path")->required();

  auto* fuse = app.add_subcommand("fuse", "fuse one registered pair");
  fuse->add_option("--ckpt", ckpt, "checkpoint")->required();
  fuse->add_option("--a", a_path, "first modality image")->required();
  fuse->add_option("--b", b_path, "second modality image")->required();
  fuse->add_option("--out", out, "fused image (.png or .pgm)")->required();
  fuse->add_option("--ttt-steps", steps, "test-time adaptation steps")
      ->check(CLI::NonNegativeNumber);
  fuse->add_option("--ttt-lr", lr, "test-time adaptation learning rate")
      ->check(CLI::PositiveNumber);
  fuse->add_option("--mapper", mapper, "variance_softmax or learned")
      ->check(CLI::IsMember({"variance_softmax", "learned"}))
      ->capture_default_str();

  auto* eval = app.add_subcommand("eval", "score all methods on seeded test splits");
  auto* bench = app.add_subcommand("bench", "compare fusion strategies with timing");
  for (auto* cmd : {eval, bench}) {
    cmd->add_option("--ckpt", ckpt, "checkpoint")->required();
    cmd->add_option("--config", config, "run configuration file")->required();
    cmd->add_option("--out", out, "results CSV")->required();
    cmd->add_option("--scores", scores, "optional per-pair scores CSV");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_generate(out, count, size, seed);
    if (*trn) return cmd_train(config, out);
    if (*fuse) return cmd_fuse(ckpt, a_path, b_path, out, steps, lr, mapper);
    if (*eval) return cmd_eval(ckpt, config, out, scores, false);
    if (*bench) return cmd_eval(ckpt, config, out, scores, true);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
