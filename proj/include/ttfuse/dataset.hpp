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
#include <optional>
#include <string>
#include <vector>

#include "ttfuse/image.hpp"
#include "ttfuse/tensor.hpp"

namespace ttfuse {

struct PairEntry {
  std::string name;  // file name shared by a/ and b/
  std::filesystem::path a;
  std::filesystem::path b;
};

// Pairs of matched file names under <root>/a and <root>/b, sorted by name.
class PairDataset {
 public:
  // Throws kNotFound for a missing root or modality directory, kCorrupt for
  // a file without a partner, kEmptyDataset when no pairs are found.
  static PairDataset open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const std::vector<PairEntry>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }

 private:
  std::filesystem::path root_;
  std::vector<PairEntry> pairs_;
};

// Luminance of both images, plus the chroma to reattach to the fused result
// when either source is color (b's chroma when both are).
struct ImagePair {
  std::string name;
  GrayImage a;
  GrayImage b;
  std::optional<ChromaPlanes> chroma;
};

// Throws kShapeMismatch when the two images differ in size.
ImagePair load_pair(const PairEntry& entry);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded Fisher-Yates shuffle; the first test_count indices form the test
// set. Both lists are returned in ascending order.
Split split(std::size_t count, std::size_t test_count, std::uint64_t seed);

// Writes <root>/a/NNNN.png and <root>/b/NNNN.png for count phantom pairs,
// plus <root>/manifest.csv listing the spec of each pair.
void write_phantom_corpus(const std::filesystem::path& root, int count,
                          int size, std::uint64_t seed);

}  // namespace ttfuse
