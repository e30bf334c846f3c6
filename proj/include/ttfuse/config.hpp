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
#include <filesystem>
#include <string>
#include <string_view>

#include "ttfuse/fusion.hpp"
#include "ttfuse/training.hpp"

namespace ttfuse {

struct EvalSettings {
  int test_count = 30;
  int repeats = 3;
  std::uint64_t seed = 0;
  bool baselines = true;
};

// Settings from a `key = value` run file; absent keys keep these defaults.
struct RunConfig {
  std::filesystem::path dataset_root;
  TrainConfig train;
  FusionOptions fusion;
  EvalSettings eval;
};

// '#' starts a comment line. Unknown or repeated keys and malformed values
// throw Error(kConfig) naming the line. A relative dataset.root is resolved
// against base_dir.
RunConfig parse_run_config(std::string_view text,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Every key with its effective value, one `key = value` per line.
std::string describe(const RunConfig& config);

}  // namespace ttfuse
