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
#include <functional>
#include <string>

#include "support.hpp"
#include "ttfuse/fusion.hpp"
#include "ttfuse/grad_check.hpp"
#include "ttfuse/network.hpp"
#include "ttfuse/ops.hpp"

using namespace ttfuse;
using ttfuse::ag::Var;
using ttfuse::testing::copy_tensor;
using ttfuse::testing::random_tensor;

namespace {

constexpr double kTol = 1e-4;

Var cst(const Tensor& t) { return Var::constant(copy_tensor(t)); }

// Scalar probe sum(out * R) with fixed random R of out's shape.
Var probe(const Var& out, std::uint64_t seed) {
  return ops::sum(ops::mul(out, cst(random_tensor(out.shape(), seed))));
}

void check_input(const std::string& name, const std::function<Var(const Var&)>& fn,
                 const Tensor& x) {
  const GradCheckReport r = grad_check(fn, x, kTol);
  INFO(name << ": worst " << r.worst_error << " at " << r.worst_index << " analytic "
            << r.analytic << " numeric " << r.numeric);
  CHECK(r.passed);
}

// Central differences on parameter storage, independent of grad_check.
void check_params(const std::string& name, const std::function<Var()>& loss,
                  const std::vector<Parameter*>& params, std::size_t samples = 24) {
  for (Parameter* p : params) {
    p->set_trainable(true);
    p->mutable_value().clear_grad();
  }
  ag::backward(loss());
  const double h = 1e-5;
  for (Parameter* p : params) {
    REQUIRE(p->value().has_grad());
    const std::vector<double> analytic(p->value().grad().begin(), p->value().grad().end());
    const std::size_t n = analytic.size();
    const std::size_t stride = std::max<std::size_t>(1, n / samples);
    for (std::size_t i = 0; i < n; i += stride) {
      double& x = p->mutable_value()[i];
      const double orig = x;
      double plus, minus;
      {
        ag::NoGradGuard guard;
        x = orig + h;
        plus = loss().value()[0];
        x = orig - h;
        minus = loss().value()[0];
      }
      x = orig;
      const double numeric = (plus - minus) / (2 * h);
      const double err = std::abs(analytic[i] - numeric) /
                         std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      INFO(name << " " << p->name() << "[" << i << "] analytic " << analytic[i]
                << " numeric " << numeric);
      CHECK(err < kTol);
    }
    p->mutable_value().clear_grad();
  }
}

}  // namespace

TEST_SUITE("gradients") {
  TEST_CASE("convolution wrt input, kernel and bias") {
    const Tensor x = random_tensor(Shape{2, 3, 7, 6}, 1);
    const Tensor k = random_tensor(Shape{4, 3, 3, 3}, 2);
    const Tensor b = random_tensor(Shape{1, 4, 1, 1}, 3);
    for (int stride : {1, 2}) {
      for (int pad : {0, 1}) {
        check_input("conv input", [&](const Var& v) {
          return probe(ops::conv2d(v, cst(k), cst(b), stride, pad), 9);
        }, x);
        check_input("conv kernel", [&](const Var& v) {
          return probe(ops::conv2d(cst(x), v, cst(b), stride, pad), 9);
        }, k);
        check_input("conv bias", [&](const Var& v) {
          return probe(ops::conv2d(cst(x), cst(k), v, stride, pad), 9);
        }, b);
      }
    }
  }

  TEST_CASE("activations and reductions") {
    const Tensor x = random_tensor(Shape{2, 3, 4, 5}, 5);
    check_input("relu", [](const Var& v) { return probe(ops::relu(v), 6); }, x);
    check_input("sigmoid", [](const Var& v) { return probe(ops::sigmoid(v), 6); }, x);
    for (auto kind : {ops::Reduction::kGlobalAvgPerChannel, ops::Reduction::kChannelMeanMap,
                      ops::Reduction::kChannelMaxMap}) {
      check_input("reduce", [&](const Var& v) { return probe(ops::reduce(v, kind), 7); }, x);
    }
  }

  TEST_CASE("elementwise algebra") {
    const Tensor x = random_tensor(Shape{1, 2, 3, 4}, 10);
    const Tensor y = random_tensor(Shape{1, 2, 3, 4}, 11);
    const Tensor pos = random_tensor(Shape{1, 2, 3, 4}, 12, 0.2, 2.0);
    check_input("add", [&](const Var& v) { return probe(ops::add(v, cst(y)), 1); }, x);
    check_input("sub", [&](const Var& v) { return probe(ops::sub(cst(y), v), 1); }, x);
    check_input("mul", [&](const Var& v) { return probe(ops::mul(v, cst(y)), 1); }, x);
    check_input("mul self", [&](const Var& v) { return probe(ops::mul(v, v), 1); }, x);
    check_input("maximum", [&](const Var& v) { return probe(ops::maximum(v, cst(y)), 1); }, x);
    check_input("scale", [&](const Var& v) { return probe(ops::scale(v, -1.7), 1); }, x);
    check_input("add_scalar", [&](const Var& v) { return probe(ops::add_scalar(v, 0.3), 1); }, x);
    check_input("square", [&](const Var& v) { return probe(ops::square(v), 1); }, x);
    check_input("sqrt", [&](const Var& v) { return probe(ops::sqrt(v), 1); }, pos);
    check_input("sum", [&](const Var& v) { return ops::sum(ops::square(v)); }, x);
    check_input("mean", [&](const Var& v) { return ops::mean(ops::square(v)); }, x);
    check_input("concat", [&](const Var& v) {
      return probe(ops::concat_channels(v, ops::square(v)), 2);
    }, x);
    check_input("slice", [&](const Var& v) { return probe(ops::slice_channels(v, 1, 1), 2); }, x);
    check_input("reshape", [&](const Var& v) {
      return probe(ops::reshape(v, Shape{1, 4, 3, 2}), 2);
    }, x);
  }

  TEST_CASE("channel and spatial broadcasts") {
    const Tensor x = random_tensor(Shape{2, 3, 4, 4}, 20);
    const Tensor c = random_tensor(Shape{2, 3, 1, 1}, 21, 0.5, 1.5);
    const Tensor m = random_tensor(Shape{2, 1, 4, 4}, 22);
    for (int side = 0; side < 2; ++side) {
      auto pick = [&](const Var& v, const Tensor& other, bool first) {
        return first ? std::pair{v, cst(other)} : std::pair{cst(x), v};
      };
      const Tensor& in = side == 0 ? x : c;
      check_input("add_channel", [&](const Var& v) {
        auto [a, b] = pick(v, c, side == 0);
        return probe(ops::add_channel(a, b), 3);
      }, in);
      check_input("sub_channel", [&](const Var& v) {
        auto [a, b] = pick(v, c, side == 0);
        return probe(ops::sub_channel(a, b), 3);
      }, in);
      check_input("mul_channel", [&](const Var& v) {
        auto [a, b] = pick(v, c, side == 0);
        return probe(ops::mul_channel(a, b), 3);
      }, in);
      check_input("div_channel", [&](const Var& v) {
        auto [a, b] = pick(v, c, side == 0);
        return probe(ops::div_channel(a, b), 3);
      }, in);
    }
    check_input("mul_spatial input", [&](const Var& v) {
      return probe(ops::mul_spatial(v, cst(m)), 4);
    }, x);
    check_input("mul_spatial map", [&](const Var& v) {
      return probe(ops::mul_spatial(cst(x), v), 4);
    }, m);
  }

  TEST_CASE("fusion primitives") {
    const Tensor s1 = random_tensor(Shape{1, 4, 1, 1}, 30, 0.1, 2.0);
    const Tensor s2 = random_tensor(Shape{1, 4, 1, 1}, 31, 0.1, 2.0);
    check_input("pair_softmax x", [&](const Var& v) {
      return probe(ops::pair_softmax(v, cst(s2), 0.7), 5);
    }, s1);
    check_input("pair_softmax y", [&](const Var& v) {
      return probe(ops::pair_softmax(cst(s1), v, 1.3), 5);
    }, s2);
    const Tensor a = random_tensor(Shape{1, 4, 3, 3}, 32);
    const Tensor b = random_tensor(Shape{1, 4, 3, 3}, 33);
    const Tensor w = random_tensor(Shape{1, 4, 1, 1}, 34);
    for (int slot = 0; slot < 6; ++slot) {
      const Tensor& in = slot == 0 ? a : slot == 1 ? b : w;
      check_input("weighted_fuse", [&](const Var& v) {
        Var args[6] = {cst(a), cst(b), cst(w), cst(s1), cst(s2), cst(w)};
        args[slot] = v;
        return probe(ops::weighted_fuse(args[0], args[1], args[2], args[3], args[4], args[5]), 6);
      }, in);
    }
    const Tensor f = random_tensor(Shape{2, 3, 5, 4}, 35);
    check_input("channel stats + zscore", [](const Var& v) {
      const StatsVar stats = channel_stats(v);
      return probe(zscore(v, stats, kStatsEpsilon), 7);
    }, f);
    for (auto strategy : {BaselineStrategy::kMean, BaselineStrategy::kMax, BaselineStrategy::kSum}) {
      check_input("baseline", [&](const Var& v) {
        return probe(baseline_fuse(v, cst(b), strategy), 8);
      }, a);
    }
  }

  TEST_CASE("losses") {
    const Tensor pred = random_tensor(Shape{2, 1, 12, 13}, 40, 0.05, 0.95);
    const Tensor target = random_tensor(Shape{2, 1, 12, 13}, 41, 0.0, 1.0);
    check_input("l1", [&](const Var& v) { return ops::l1_loss(v, target); }, pred);
    check_input("ssim", [&](const Var& v) { return ops::ssim_loss(v, target); }, pred);
  }

  TEST_CASE("network layers wrt inputs and parameters") {
    const Tensor x16 = random_tensor(Shape{1, 16, 6, 6}, 50);
    ConvBlock block("blk", 16, 8);
    ChannelAttention ca("ca", 16);
    SpatialAttention sa("sa");
    ResidualAttentionBlock rab("rab", 16);
    // Non-zero biases so bias paths are exercised.
    SplitMix64 rng(77);
    for (auto* layer_params : {&block.bias, &ca.fc1_bias, &ca.fc2_bias, &sa.bias}) {
      for (double& v : layer_params->mutable_value().data()) v = rng.uniform(-0.2, 0.2);
    }
    auto init = [&](Parameter& p, std::uint64_t seed) {
      p.mutable_value() = random_tensor(p.value().shape(), seed, -0.3, 0.3);
    };
    init(block.weight, 51);
    init(ca.fc1_weight, 52);
    init(ca.fc2_weight, 53);
    init(sa.weight, 54);
    init(rab.conv_in.weight, 55);
    init(rab.conv_out.weight, 56);
    init(rab.channel_att.fc1_weight, 57);
    init(rab.channel_att.fc2_weight, 58);
    init(rab.spatial_att.weight, 59);

    check_input("conv block", [&](const Var& v) { return probe(block.forward(v), 1); }, x16);
    check_input("channel attention", [&](const Var& v) { return probe(ca.forward(v), 1); }, x16);
    check_input("spatial attention", [&](const Var& v) { return probe(sa.forward(v), 1); }, x16);
    check_input("residual attention", [&](const Var& v) { return probe(rab.forward(v), 1); }, x16);

    const Var in = cst(x16);
    check_params("conv block", [&] { return probe(block.forward(in), 2); },
                 {&block.weight, &block.bias});
    check_params("channel attention", [&] { return probe(ca.forward(in), 2); },
                 {&ca.fc1_weight, &ca.fc1_bias, &ca.fc2_weight, &ca.fc2_bias});
    check_params("spatial attention", [&] { return probe(sa.forward(in), 2); },
                 {&sa.weight, &sa.bias});
    check_params("residual attention", [&] { return probe(rab.forward(in), 2); },
                 {&rab.conv_in.weight, &rab.conv_in.bias, &rab.channel_att.fc1_weight,
                  &rab.channel_att.fc2_weight, &rab.spatial_att.weight,
                  &rab.conv_out.weight, &rab.conv_out.bias});
  }

  TEST_CASE("encoder, decoder and learned mapper") {
    FusionNetwork net = FusionNetwork::create({true, true}, 3);
    const Tensor img = random_tensor(Shape{1, 1, 8, 8}, 60, 0.0, 1.0);
    check_input("encoder", [&](const Var& v) { return probe(net.encode(v), 3); }, img);
    const Tensor feats = random_tensor(Shape{1, kFeatureChannels, 8, 8}, 61);
    check_input("decoder", [&](const Var& v) { return probe(net.decode(v), 3); }, feats);
    check_input("encode-decode", [&](const Var& v) {
      return probe(net.decode(net.encode(v)), 4);
    }, img);

    const Tensor mean = random_tensor(Shape{1, 6, 1, 1}, 62);
    const Tensor sd = random_tensor(Shape{1, 6, 1, 1}, 63, 0.1, 1.0);
    const LearnedMapper& mapper = *net.mapper();
    for (Modality slot : {Modality::kA, Modality::kB}) {
      check_input("mapper mean", [&](const Var& v) {
        auto [logit, bias] = mapper.forward(slot, v, cst(sd));
        return ops::add(probe(logit, 5), probe(bias, 6));
      }, mean);
      check_input("mapper std", [&](const Var& v) {
        auto [logit, bias] = mapper.forward(slot, cst(mean), v);
        return ops::add(probe(logit, 5), probe(bias, 6));
      }, sd);
    }
  }

  TEST_CASE("end-to-end encode, fuse, decode") {
    for (bool learned : {false, true}) {
      for (bool shared : {true, false}) {
        FusionNetwork net = FusionNetwork::create({shared, learned}, 5);
        // Biases off zero, away from relu kinks.
        SplitMix64 brng(55);
        for (Parameter* p : net.parameters()) {
          if (!p->name().ends_with(".bias")) continue;
          for (double& v : p->mutable_value().data()) v = brng.uniform(-0.1, 0.1);
        }
        const Tensor a = random_tensor(Shape{1, 1, 8, 8}, 70, 0.0, 1.0);
        const Tensor b = random_tensor(Shape{1, 1, 8, 8}, 71, 0.0, 1.0);
        const WeightMapper mapper{learned ? MapperKind::kLearnedAffine
                                          : MapperKind::kVarianceSoftmax,
                                  1.0, net.mapper()};
        auto composite = [&](const Var& va, const Var& vb) {
          return net.decode(fuse_features(mapper, net.encode(va, Modality::kA),
                                          net.encode(vb, Modality::kB)));
        };
        check_input("composite wrt a", [&](const Var& v) {
          return probe(composite(v, cst(b)), 8);
        }, a);
        check_input("composite wrt b", [&](const Var& v) {
          return probe(composite(cst(a), v), 8);
        }, b);
        check_params("composite", [&] { return probe(composite(cst(a), cst(b)), 8); },
                     net.parameters(), 6);
      }
    }
  }

  TEST_CASE("fusion loss through the decoder") {
    FusionNetwork net = FusionNetwork::create({}, 8);
    const Tensor a = random_tensor(Shape{1, 1, 12, 12}, 80, 0.0, 1.0);
    const Tensor b = random_tensor(Shape{1, 1, 12, 12}, 81, 0.0, 1.0);
    const EncodedPair enc = encode_pair(net, a, b);
    const WeightMapper mapper;
    const Var fused = fuse_features(mapper, cst(enc.features_a), cst(enc.features_b));
    check_params("ttt objective", [&] {
      return fusion_loss(net.decode(fused), a, b, 0.8, 0.2);
    }, net.decoder_parameters(), 8);
  }
}
