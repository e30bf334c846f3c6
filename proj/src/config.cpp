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

#include "ttfuse/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ttfuse/error.hpp"

namespace ttfuse {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(int line, const std::string& message) {
  throw Error(ErrorKind::kConfig, "config line " + std::to_string(line) + ": " + message);
}

template <typename T>
T parse_number(std::string_view value, int line, const std::string& key) {
  T out{};
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) {
    fail(line, "invalid value '" + std::string(value) + "' for " + key);
  }
  return out;
}

int parse_int(std::string_view value, int line, const std::string& key, int lo) {
  const int v = parse_number<int>(value, line, key);
  if (v < lo) fail(line, key + " must be at least " + std::to_string(lo));
  return v;
}

double parse_positive(std::string_view value, int line, const std::string& key) {
  const double v = parse_number<double>(value, line, key);
  if (!(v > 0.0) || !std::isfinite(v)) fail(line, key + " must be positive");
  return v;
}

bool parse_bool(std::string_view value, int line, const std::string& key) {
  if (value == "true") return true;
  if (value == "false") return false;
  fail(line, "invalid value '" + std::string(value) + "' for " + key +
                 " (expected true or false)");
}

using Setter = std::function<void(RunConfig&, std::string_view, int)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset.root",
       [](RunConfig& c, std::string_view v, int) { c.dataset_root = std::string(v); }},
      {"train.epochs",
       [](RunConfig& c, std::string_view v, int l) {
         c.train.epochs = parse_int(v, l, "train.epochs", 1);
       }},
      {"train.batch_size",
       [](RunConfig& c, std::string_view v, int l) {
         c.train.batch_size = parse_int(v, l, "train.batch_size", 1);
       }},
      {"train.seed",
       [](RunConfig& c, std::string_view v, int l) {
         c.train.seed = parse_number<std::uint64_t>(v, l, "train.seed");
       }},
      {"train.shared_encoder",
       [](RunConfig& c, std::string_view v, int l) {
         c.train.network.shared_encoder = parse_bool(v, l, "train.shared_encoder");
       }},
      {"fusion.mapper",
       [](RunConfig& c, std::string_view v, int l) {
         if (v == "variance_softmax") {
           c.fusion.mapper = MapperKind::kVarianceSoftmax;
         } else if (v == "learned") {
           c.fusion.mapper = MapperKind::kLearnedAffine;
         } else {
           fail(l, "fusion.mapper must be variance_softmax or learned, got '" +
                       std::string(v) + "'");
         }
         c.train.network.learned_mapper = c.fusion.mapper == MapperKind::kLearnedAffine;
       }},
      {"fusion.temperature",
       [](RunConfig& c, std::string_view v, int l) {
         c.fusion.temperature = parse_positive(v, l, "fusion.temperature");
       }},
      {"fusion.ttt_steps",
       [](RunConfig& c, std::string_view v, int l) {
         c.fusion.ttt.steps = parse_int(v, l, "fusion.ttt_steps", 0);
       }},
      {"fusion.ttt_lr",
       [](RunConfig& c, std::string_view v, int l) {
         c.fusion.ttt.lr = parse_positive(v, l, "fusion.ttt_lr");
       }},
      {"fusion.adapt_scope",
       [](RunConfig& c, std::string_view v, int l) {
         if (v == "fusion") {
           c.fusion.ttt.scope = AdaptScope::kFusion;
         } else if (v == "fusion_encoder") {
           c.fusion.ttt.scope = AdaptScope::kFusionEncoder;
         } else {
           fail(l, "fusion.adapt_scope must be fusion or fusion_encoder, got '" +
                       std::string(v) + "'");
         }
       }},
      {"eval.test_count",
       [](RunConfig& c, std::string_view v, int l) {
         c.eval.test_count = parse_int(v, l, "eval.test_count", 1);
       }},
      {"eval.repeats",
       [](RunConfig& c, std::string_view v, int l) {
         c.eval.repeats = parse_int(v, l, "eval.repeats", 1);
       }},
      {"eval.seed",
       [](RunConfig& c, std::string_view v, int l) {
         c.eval.seed = parse_number<std::uint64_t>(v, l, "eval.seed");
       }},
      {"eval.baselines",
       [](RunConfig& c, std::string_view v, int l) {
         c.eval.baselines = parse_bool(v, l, "eval.baselines");
       }},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(std::string_view text,
                           const std::filesystem::path& base_dir) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  RunConfig config;
  std::set<std::string> seen;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) fail(line_no, "unknown key '" + key + "'");
    if (!seen.insert(key).second) fail(line_no, "duplicate key '" + key + "'");
    if (value.empty()) fail(line_no, "missing value for " + key);
    it->second(config, value, line_no);
  }
  if (!config.dataset_root.empty() && config.dataset_root.is_relative() &&
      !base_dir.empty()) {
    config.dataset_root = base_dir / config.dataset_root;
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path());
}

std::string describe(const RunConfig& c) {
  std::ostringstream out;
  out << "dataset.root = " << c.dataset_root.string() << '\n'
      << "train.epochs = " << c.train.epochs << '\n'
      << "train.batch_size = " << c.train.batch_size << '\n'
      << "train.seed = " << c.train.seed << '\n'
      << "train.shared_encoder = " << (c.train.network.shared_encoder ? "true" : "false") << '\n'
      << "fusion.mapper = "
      << (c.fusion.mapper == MapperKind::kLearnedAffine ? "learned" : "variance_softmax") << '\n'
      << "fusion.temperature = " << c.fusion.temperature << '\n'
      << "fusion.ttt_steps = " << c.fusion.ttt.steps << '\n'
      << "fusion.ttt_lr = " << c.fusion.ttt.lr << '\n'
      << "fusion.adapt_scope = "
      << (c.fusion.ttt.scope == AdaptScope::kFusion ? "fusion" : "fusion_encoder") << '\n'
      << "eval.test_count = " << c.eval.test_count << '\n'
      << "eval.repeats = " << c.eval.repeats << '\n'
      << "eval.seed = " << c.eval.seed << '\n'
      << "eval.baselines = " << (c.eval.baselines ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace ttfuse
