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

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "ttfuse/checkpoint.hpp"
#include "ttfuse/error.hpp"
#include "ttfuse/phantom.hpp"
#include "ttfuse/training.hpp"

using namespace ttfuse;
namespace fs = std::filesystem;
using ttfuse::testing::scratch_dir;

namespace {

std::vector<ImagePair> phantom_pairs(int count, int size) {
  std::vector<ImagePair> out;
  for (int i = 0; i < count; ++i) {
    PhantomPair p = generate_phantom(corpus_phantom_spec(5, i, size));
    out.push_back({std::to_string(i), std::move(p.a), std::move(p.b), std::nullopt});
  }
  return out;
}

ErrorKind parse_error(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_checkpoint(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("parse succeeded");
  return ErrorKind::kInvalidArgument;
}

bool same_parameters(const FusionNetwork& x, const FusionNetwork& y) {
  const auto px = x.parameters(), py = y.parameters();
  if (px.size() != py.size()) return false;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (px[i]->name() != py[i]->name()) return false;
    const auto& a = px[i]->value().data();
    const auto& b = py[i]->value().data();
    if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("short run lowers the frozen loss and follows the schedule") {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 4;
    const auto pairs = phantom_pairs(8, 64);
    const TrainResult r = train(pairs, cfg);
    REQUIRE(r.log.size() == 3);
    CHECK(r.log.back().frozen_loss < r.initial_frozen_loss);
    CHECK(r.log.back().loss < r.log.front().loss);
    for (const EpochRecord& rec : r.log) {
      const double expected =
          3e-7 + (1e-4 - 3e-7) * (1.0 + std::cos(std::numbers::pi * rec.epoch / 2.0)) / 2.0;
      CHECK(rec.lr == doctest::Approx(expected).epsilon(1e-15));
      CHECK(std::isfinite(rec.loss));
    }
    CHECK(r.log.front().lr == 1e-4);
    CHECK(r.log.back().lr == doctest::Approx(3e-7).epsilon(1e-12));

    const TrainResult again = train(pairs, cfg);
    CHECK(same_parameters(r.network, again.network));
    CHECK(again.log.back().loss == r.log.back().loss);
  }

  TEST_CASE("training arguments are validated") {
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train({}, cfg), Error);
    try {
      train({}, cfg);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kEmptyDataset);
    }
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(phantom_pairs(1, 64), cfg), Error);
    cfg.epochs = 1;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train(phantom_pairs(1, 64), cfg), Error);
  }

  TEST_CASE("learned mapper and split encoders train") {
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.network = {false, true};
    const TrainResult r = train(phantom_pairs(2, 64), cfg);
    CHECK(r.network.config().learned_mapper);
    CHECK(std::isfinite(r.log[0].loss));
  }
}

TEST_SUITE("training") {
  TEST_CASE("checkpoint round trip") {
    for (const NetworkConfig config : {NetworkConfig{true, false}, NetworkConfig{false, true}}) {
      const FusionNetwork net = FusionNetwork::create(config, 12);
      const fs::path path = fs::path(scratch_dir("ckpt")) / "m.ttfz";
      save_checkpoint(to_checkpoint(net), path);
      const FusionNetwork back = network_from_checkpoint(load_checkpoint(path));
      CHECK(same_parameters(net, back));
      CHECK(back.config().shared_encoder == config.shared_encoder);
      CHECK(back.config().learned_mapper == config.learned_mapper);
      CHECK(serialize_checkpoint(to_checkpoint(back)) == serialize_checkpoint(to_checkpoint(net)));
    }
  }

  TEST_CASE("checkpoint corruption is detected") {
    const auto good = serialize_checkpoint(to_checkpoint(FusionNetwork::create({}, 1)));
    CHECK_NOTHROW(parse_checkpoint(good));

    auto flipped = good;
    flipped[flipped.size() / 2] ^= 0x01;
    CHECK(parse_error(flipped) == ErrorKind::kBadChecksum);

    auto magic = good;
    magic[0] = 'X';
    CHECK(parse_error(magic) == ErrorKind::kBadMagic);

    auto version = good;
    version[5] = 2;
    CHECK(parse_error(version) == ErrorKind::kBadVersion);

    for (std::size_t cut : {std::size_t{3}, std::size_t{9}, good.size() / 3, good.size() - 2}) {
      CHECK(parse_error(std::vector<std::uint8_t>(good.begin(), good.begin() + cut)) ==
            ErrorKind::kTruncated);
    }
    auto longer = good;
    longer.push_back(0);
    CHECK(parse_error(longer) != ErrorKind::kBadMagic);

    CHECK_THROWS_AS(load_checkpoint(fs::path(scratch_dir("ckpt_missing")) / "none.ttfz"), Error);
  }

  TEST_CASE("incompatible checkpoints are rejected whole") {
    Checkpoint ck = to_checkpoint(FusionNetwork::create({}, 1));
    Checkpoint missing = ck;
    missing.tensors.pop_back();
    CHECK_THROWS_AS(network_from_checkpoint(missing), Error);

    Checkpoint reshaped = ck;
    reshaped.tensors.back().tensor = Tensor(Shape{1, 1, 1, 7});
    CHECK_THROWS_AS(network_from_checkpoint(reshaped), Error);

    Checkpoint extra = ck;
    extra.tensors.push_back({"stray.weight", Tensor(Shape{1, 1, 1, 1})});
    CHECK_THROWS_AS(network_from_checkpoint(extra), Error);

    Checkpoint dup = ck;
    dup.tensors.push_back(dup.tensors.front());
    CHECK_THROWS_AS(network_from_checkpoint(dup), Error);
  }
}
