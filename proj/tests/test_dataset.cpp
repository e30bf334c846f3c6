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

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "support.hpp"
#include "ttfuse/dataset.hpp"
#include "ttfuse/error.hpp"
#include "ttfuse/phantom.hpp"

using namespace ttfuse;
namespace fs = std::filesystem;
using ttfuse::testing::random_image;
using ttfuse::testing::scratch_dir;

namespace {

double region_mean(const GrayImage& img, const std::vector<Region>& regions, Region r) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (regions[i] == r) {
      sum += img.pixels[i];
      ++n;
    }
  }
  return n ? sum / n : -1.0;
}

ErrorKind open_error(const fs::path& root) {
  try {
    PairDataset::open(root);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("open succeeded");
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("phantoms are deterministic and 8-bit") {
    const PhantomSpec spec{96, 17, 3, 0.02, 0.03};
    const PhantomPair p = generate_phantom(spec);
    const PhantomPair q = generate_phantom(spec);
    CHECK(p.a.pixels == q.a.pixels);
    CHECK(p.b.pixels == q.b.pixels);
    CHECK(p.regions == q.regions);
    CHECK(p.a.width == 96);
    for (double v : p.a.pixels) CHECK(v * 255.0 == std::round(v * 255.0));
    PhantomSpec other = spec;
    other.seed = 18;
    CHECK(generate_phantom(other).a.pixels != p.a.pixels);
  }

  TEST_CASE("phantom modality contrast") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const PhantomPair p = generate_phantom({128, seed, 2, 0.01, 0.01});
      const double rim_b = region_mean(p.b, p.regions, Region::kRim);
      const double soft_b = region_mean(p.b, p.regions, Region::kSoftTissue);
      const double rim_a = region_mean(p.a, p.regions, Region::kRim);
      const double soft_a = region_mean(p.a, p.regions, Region::kSoftTissue);
      CHECK(rim_b > soft_b);
      CHECK(soft_a > rim_a);
      CHECK(region_mean(p.a, p.regions, Region::kBackground) < 0.05);
      CHECK(std::count(p.regions.begin(), p.regions.end(), Region::kLesion) > 0);
    }
    const PhantomPair none = generate_phantom({128, 4, 0, 0.0, 0.0});
    CHECK(std::count(none.regions.begin(), none.regions.end(), Region::kLesion) == 0);
  }

  TEST_CASE("phantom argument validation") {
    CHECK_THROWS_AS(generate_phantom({32, 0, 0, 0.01, 0.01}), Error);
    CHECK_THROWS_AS(generate_phantom({64, 0, 6, 0.01, 0.01}), Error);
    CHECK_THROWS_AS(generate_phantom({64, 0, -1, 0.01, 0.01}), Error);
    CHECK_THROWS_AS(generate_phantom({64, 0, 1, 0.2, 0.01}), Error);
    CHECK_THROWS_AS(generate_phantom({64, 0, 1, 0.01, -0.01}), Error);
    const PhantomSpec s = corpus_phantom_spec(42, 3, 128);
    CHECK(s.size == 128);
    CHECK(s.lesion_count >= 0);
    CHECK(s.lesion_count <= kPhantomMaxLesions);
    CHECK(corpus_phantom_spec(42, 3, 128).seed == s.seed);
    CHECK(corpus_phantom_spec(42, 4, 128).seed != s.seed);
  }

  TEST_CASE("split partitions the index range") {
    const Split s = split(184, 30, 0);
    CHECK(s.test.size() == 30);
    CHECK(s.train.size() == 154);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 184);
    CHECK(*all.rbegin() == 183);
    CHECK(std::is_sorted(s.test.begin(), s.test.end()));
    CHECK(split(184, 30, 0).test == s.test);
    CHECK(split(184, 30, 1).test != s.test);
    CHECK(split(5, 4, 3).train.size() == 1);
    CHECK_THROWS_AS(split(5, 6, 0), Error);
    CHECK_THROWS_AS(split(5, 5, 0), Error);
  }

  TEST_CASE("phantom corpus layout") {
    const fs::path root = scratch_dir("corpus");
    write_phantom_corpus(root, 3, 64, 9);
    const PairDataset ds = PairDataset::open(root);
    REQUIRE(ds.size() == 3);
    CHECK(ds.pairs()[0].name == "0000.png");
    CHECK(ds.pairs()[2].name == "0002.png");

    std::ifstream in(root / "manifest.csv");
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "file,size,seed,lesion_count,noise_sigma_a,noise_sigma_b");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);

    const ImagePair pair = load_pair(ds.pairs()[1]);
    const PhantomPair direct = generate_phantom(corpus_phantom_spec(9, 1, 64));
    CHECK(pair.a.pixels == direct.a.pixels);
    CHECK(pair.b.pixels == direct.b.pixels);
    CHECK_FALSE(pair.chroma.has_value());

    const fs::path again = scratch_dir("corpus_again");
    write_phantom_corpus(again, 3, 64, 9);
    for (const char* f : {"a/0001.png", "b/0002.png", "manifest.csv"}) {
      std::ifstream x(root / f, std::ios::binary), y(again / f, std::ios::binary);
      std::stringstream sx, sy;
      sx << x.rdbuf();
      sy << y.rdbuf();
      CHECK(sx.str() == sy.str());
    }
    CHECK_THROWS_AS(write_phantom_corpus(scratch_dir("corpus_bad"), 0, 64, 1), Error);
  }

  TEST_CASE("dataset discovery errors") {
    const fs::path root = scratch_dir("discovery");
    CHECK(open_error(root / "nowhere") == ErrorKind::kNotFound);
    CHECK(open_error(root) == ErrorKind::kNotFound);
    fs::create_directories(root / "a");
    fs::create_directories(root / "b");
    CHECK(open_error(root) == ErrorKind::kEmptyDataset);
    save_image(root / "a" / "x.png", random_image(8, 8, 1));
    CHECK(open_error(root) == ErrorKind::kCorrupt);
    save_image(root / "b" / "x.png", random_image(8, 8, 2));
    CHECK(PairDataset::open(root).size() == 1);
    save_image(root / "a" / "y.png", random_image(8, 8, 1));
    save_image(root / "b" / "y.png", random_image(9, 8, 2));
    const PairDataset ds = PairDataset::open(root);
    CHECK_THROWS_AS(load_pair(ds.pairs()[1]), Error);
  }

  TEST_CASE("chroma comes from the colour source") {
    const fs::path root = scratch_dir("chroma");
    fs::create_directories(root / "a");
    fs::create_directories(root / "b");
    save_image(root / "a" / "p.png", random_image(4, 4, 1));
    ColorImage c{4, 4, {}};
    for (int i = 0; i < 48; ++i) c.rgb.push_back((i % 3 == 0) ? 1.0 : 0.2);
    save_image(root / "b" / "p.png", c);
    const ImagePair pair = load_pair(PairDataset::open(root).pairs()[0]);
    REQUIRE(pair.chroma.has_value());
    CHECK(pair.chroma->cr[0] > 0.5);
    CHECK(pair.b.pixels[0] == doctest::Approx(0.299 + 0.701 * 0.2).epsilon(1e-12));
  }
}
