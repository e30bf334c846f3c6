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

#include "ttfuse/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <utility>

#include "ttfuse/error.hpp"
#include "ttfuse/phantom.hpp"
#include "ttfuse/rng.hpp"

namespace ttfuse {
namespace {

namespace fs = std::filesystem;

std::map<std::string, fs::path> list_images(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorKind::kNotFound, "missing dataset directory " + dir.string());
  }
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.empty() || name[0] == '.') continue;
    files.emplace(name, entry.path());
  }
  return files;
}

}  // namespace

PairDataset PairDataset::open(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorKind::kNotFound, "dataset root not found: " + root.string());
  }
  const auto a = list_images(root / "a");
  const auto b = list_images(root / "b");
  PairDataset dataset;
  dataset.root_ = root;
  for (const auto& [name, path] : a) {
    const auto it = b.find(name);
    if (it == b.end()) {
      throw Error(ErrorKind::kCorrupt,
                  "a/" + name + " has no partner in " + (root / "b").string());
    }
    dataset.pairs_.push_back({name, path, it->second});
  }
  for (const auto& [name, path] : b) {
    if (!a.count(name)) {
      throw Error(ErrorKind::kCorrupt,
                  "b/" + name + " has no partner in " + (root / "a").string());
    }
  }
  if (dataset.pairs_.empty()) {
    throw Error(ErrorKind::kEmptyDataset, "no image pairs under " + root.string());
  }
  return dataset;
}

ImagePair load_pair(const PairEntry& entry) {
  const Image a = load_image(entry.a);
  const Image b = load_image(entry.b);
  ImagePair pair;
  pair.name = entry.name;
  if (const auto* color = std::get_if<ColorImage>(&b)) {
    auto [luma, chroma] = split_luma(*color);
    pair.b = std::move(luma);
    pair.chroma = std::move(chroma);
  } else {
    pair.b = std::get<GrayImage>(b);
  }
  if (const auto* color = std::get_if<ColorImage>(&a)) {
    auto [luma, chroma] = split_luma(*color);
    pair.a = std::move(luma);
    if (!pair.chroma) pair.chroma = std::move(chroma);
  } else {
    pair.a = std::get<GrayImage>(a);
  }
  if (pair.a.width != pair.b.width || pair.a.height != pair.b.height) {
    throw Error(ErrorKind::kShapeMismatch,
                "pair " + entry.name + ": a is " + std::to_string(pair.a.width) +
                    "x" + std::to_string(pair.a.height) + ", b is " +
                    std::to_string(pair.b.width) + "x" +
                    std::to_string(pair.b.height));
  }
  return pair;
}

Split split(std::size_t count, std::size_t test_count, std::uint64_t seed) {
  if (test_count >= count) {
    throw Error(ErrorKind::kInvalidArgument,
                "test_count " + std::to_string(test_count) +
                    " must be smaller than the dataset size " +
                    std::to_string(count));
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = count - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  Split out;
  out.test.assign(order.begin(), order.begin() + static_cast<long>(test_count));
  out.train.assign(order.begin() + static_cast<long>(test_count), order.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

void write_phantom_corpus(const fs::path& root, int count, int size,
                          std::uint64_t seed) {
  if (count <= 0 || count > 9999) {
    throw Error(ErrorKind::kInvalidArgument,
                "phantom count must be in [1, 9999], got " + std::to_string(count));
  }
  std::error_code ec;
  fs::create_directories(root / "a", ec);
  fs::create_directories(root / "b", ec);
  if (ec) {
    throw Error(ErrorKind::kIo, "cannot create " + root.string() + ": " + ec.message());
  }
  std::string manifest = "file,size,seed,lesion_count,noise_sigma_a,noise_sigma_b\n";
  for (int i = 0; i < count; ++i) {
    const PhantomSpec spec = corpus_phantom_spec(seed, i, size);
    const PhantomPair pair = generate_phantom(spec);
    char name[16];
    std::snprintf(name, sizeof(name), "%04d.png", i);
    save_image(root / "a" / name, pair.a);
    save_image(root / "b" / name, pair.b);
    char line[160];
    std::snprintf(line, sizeof(line), "%s,%d,%llu,%d,%.17g,%.17g\n", name, spec.size,
                  static_cast<unsigned long long>(spec.seed), spec.lesion_count,
                  spec.noise_sigma_a, spec.noise_sigma_b);
    manifest += line;
  }
  std::ofstream out(root / "manifest.csv", std::ios::binary | std::ios::trunc);
  out << manifest;
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + (root / "manifest.csv").string());
}

}  // namespace ttfuse
