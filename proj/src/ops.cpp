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

#include "ttfuse/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "ttfuse/error.hpp"

namespace ttfuse::ops {
namespace {

// Order-independent exact sum of doubles in a wide fixed-point register.
class ExactSum {
 public:
  void add(double x) {
    if (x == 0.0) return;
    if (!std::isfinite(x)) {
      special_ += x;
      has_special_ = true;
      return;
    }
    int exp = 0;
    const double frac = std::frexp(x, &exp);
    const auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
    const int pos = exp - 53 + kOffset;
    const int idx = pos / 32;
    const auto wide = static_cast<unsigned __int128>(mant < 0 ? -mant : mant) << (pos % 32);
    const std::int64_t sign = mant < 0 ? -1 : 1;
    for (int k = 0; k < 3; ++k) {
      limbs_[idx + k] += sign * static_cast<std::int64_t>((wide >> (32 * k)) & 0xffffffffu);
    }
    if (++pending_ == (1u << 30)) normalize();
  }

  // Exact sum divided by count, with one truncation in the fixed-point domain.
  double mean(std::uint64_t count) {
    if (has_special_) return special_ / static_cast<double>(count);
    normalize();
    std::array<std::int64_t, kLimbs> mag = limbs_;
    const bool negative = mag.back() < 0;
    if (negative) {
      for (auto& l : mag) l = -l;
      carry(mag);
    }
    std::uint64_t rem = 0;
    for (int i = kLimbs - 1; i >= 0; --i) {
      const std::uint64_t cur = (rem << 32) | static_cast<std::uint64_t>(mag[i]);
      mag[i] = static_cast<std::int64_t>(cur / count);
      rem = cur % count;
    }
    double out = 0.0;
    for (int i = kLimbs - 1; i >= 0; --i) {
      if (mag[i] != 0) out += std::ldexp(static_cast<double>(mag[i]), 32 * i - kOffset);
    }
    return negative ? -out : out;
  }

 private:
  static constexpr int kOffset = 1126;  // smallest subnormal lands at bit 0
  static constexpr int kLimbs = 72;

  static void carry(std::array<std::int64_t, kLimbs>& l) {
    for (int i = 0; i + 1 < kLimbs; ++i) {
      const std::int64_t c = l[i] >> 32;
      l[i] -= c * (std::int64_t{1} << 32);
      l[i + 1] += c;
    }
  }

  void normalize() {
    carry(limbs_);
    pending_ = 0;
  }

  std::array<std::int64_t, kLimbs> limbs_{};
  std::uint32_t pending_ = 0;
  double special_ = 0.0;
  bool has_special_ = false;
};

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using OuterStride = Eigen::OuterStride<>;

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
  throw Error(ErrorKind::kShapeMismatch, op + ": " + what);
}

void expect_same(const std::string& op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    shape_error(op, "operands " + a.shape().str() + " and " + b.shape().str() +
                        " differ");
  }
}

void expect_per_channel(const std::string& op, const Var& input,
                        const Var& per_channel) {
  const Shape& s = input.shape();
  const Shape want{s.n, s.c, 1, 1};
  if (per_channel.shape() != want) {
    shape_error(op, "per-channel operand " + per_channel.shape().str() +
                        " does not match input " + s.str() + " (want " +
                        want.str() + ")");
  }
}

// ---------------------------------------------------------------------------
// convolution

struct ConvGeometry {
  int cin, h, w, cout, k, stride, pad, hout, wout;
  int patch() const { return cin * k * k; }
};

// Rows of `col` are (ci, ky, kx) taps, columns are output positions of the
// row band [oy0, oy1).
void im2col(const double* x, const ConvGeometry& g, int oy0, int oy1,
            double* col) {
  const int positions = (oy1 - oy0) * g.wout;
  for (int ci = 0; ci < g.cin; ++ci) {
    const double* plane = x + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* dst =
            col + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) *
                      positions;
        for (int oy = oy0; oy < oy1; ++oy) {
          double* d = dst + (oy - oy0) * g.wout;
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) {
            std::fill(d, d + g.wout, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wout; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            d[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, int oy0, int oy1,
                double* dx) {
  const int positions = (oy1 - oy0) * g.wout;
  for (int ci = 0; ci < g.cin; ++ci) {
    double* plane = dx + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* src =
            col + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) *
                      positions;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const double* s = src + (oy - oy0) * g.wout;
          double* d = plane + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wout; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) d[ix] += s[ox];
          }
        }
      }
    }
  }
}

int rows_per_tile(const ConvGeometry& g) {
  return std::max(1, std::min(g.hout, 4096 / std::max(1, g.wout)));
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, const Var& bias, int stride,
           int padding) {
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  if (ks.h != ks.w) {
    shape_error("conv2d", "kernel " + ks.str() + " is not square");
  }
  if (ks.c != xs.c) {
    shape_error("conv2d", "input " + xs.str() + " has " +
                              std::to_string(xs.c) +
                              " channels but kernel " + ks.str() +
                              " expects " + std::to_string(ks.c));
  }
  if (stride < 1 || padding < 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "conv2d: stride must be >= 1 and padding >= 0");
  }
  if (bias.defined() && bias.shape() != Shape{1, ks.n, 1, 1}) {
    shape_error("conv2d", "bias " + bias.shape().str() + " does not match " +
                              std::to_string(ks.n) + " output channels");
  }
  ConvGeometry g{xs.c, xs.h, xs.w, ks.n, ks.h, stride, padding, 0, 0};
  const int span_h = xs.h + 2 * padding - g.k;
  const int span_w = xs.w + 2 * padding - g.k;
  if (span_h < 0 || span_w < 0) {
    shape_error("conv2d", "kernel " + ks.str() + " larger than padded input " +
                              xs.str());
  }
  g.hout = span_h / stride + 1;
  g.wout = span_w / stride + 1;

  const Shape out_shape{xs.n, g.cout, g.hout, g.wout};
  Tensor out(out_shape);
  const std::size_t in_stride = static_cast<std::size_t>(g.cin) * g.h * g.w;
  const std::size_t out_plane = static_cast<std::size_t>(g.hout) * g.wout;
  const int tile = rows_per_tile(g);
  std::vector<double> col(static_cast<std::size_t>(g.patch()) * tile * g.wout);

  const Eigen::Map<const RowMat> weights(kernel.value().data().data(), g.cout,
                                         g.patch());
  for (int n = 0; n < xs.n; ++n) {
    const double* x = input.value().data().data() + n * in_stride;
    double* y = out.data().data() + n * g.cout * out_plane;
    for (int oy0 = 0; oy0 < g.hout; oy0 += tile) {
      const int oy1 = std::min(g.hout, oy0 + tile);
      const int positions = (oy1 - oy0) * g.wout;
      im2col(x, g, oy0, oy1, col.data());
      const Eigen::Map<const RowMat> c(col.data(), g.patch(), positions);
      Eigen::Map<RowMat, 0, OuterStride> o(y + oy0 * g.wout, g.cout, positions,
                                           OuterStride(out_plane));
      o.noalias() = weights * c;
    }
    if (bias.defined()) {
      for (int co = 0; co < g.cout; ++co) {
        const double b = bias.value()[co];
        double* p = y + co * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) p[i] += b;
      }
    }
  }

  std::vector<Var> inputs{input, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return ag::record(std::move(out), std::move(inputs), [g, xs](ag::Node& self) {
    const auto gout = self.value.grad();
    const auto dx = ag::input_grad(self, 0);
    const auto dw = ag::input_grad(self, 1);
    const auto db = self.inputs.size() > 2 ? ag::input_grad(self, 2)
                                           : std::span<double>{};
    const std::size_t in_stride = static_cast<std::size_t>(g.cin) * g.h * g.w;
    const std::size_t out_plane = static_cast<std::size_t>(g.hout) * g.wout;
    const int tile = rows_per_tile(g);
    std::vector<double> col(static_cast<std::size_t>(g.patch()) * tile *
                            g.wout);
    std::vector<double> dcol(dx.empty() ? 0 : col.size());
    const Eigen::Map<const RowMat> weights(
        self.inputs[1]->value.data().data(), g.cout, g.patch());
    const double* xdata = self.inputs[0]->value.data().data();

    for (int n = 0; n < xs.n; ++n) {
      const double* go = gout.data() + n * g.cout * out_plane;
      if (!db.empty()) {
        for (int co = 0; co < g.cout; ++co) {
          double acc = 0.0;
          const double* p = go + co * out_plane;
          for (std::size_t i = 0; i < out_plane; ++i) acc += p[i];
          db[co] += acc;
        }
      }
      if (dw.empty() && dx.empty()) continue;
      for (int oy0 = 0; oy0 < g.hout; oy0 += tile) {
        const int oy1 = std::min(g.hout, oy0 + tile);
        const int positions = (oy1 - oy0) * g.wout;
        const Eigen::Map<const RowMat, 0, OuterStride> grad_tile(
            go + oy0 * g.wout, g.cout, positions, OuterStride(out_plane));
        if (!dw.empty()) {
          im2col(xdata + n * in_stride, g, oy0, oy1, col.data());
          const Eigen::Map<const RowMat> c(col.data(), g.patch(), positions);
          Eigen::Map<RowMat> dweights(dw.data(), g.cout, g.patch());
          dweights.noalias() += grad_tile * c.transpose();
        }
        if (!dx.empty()) {
          Eigen::Map<RowMat> dc(dcol.data(), g.patch(), positions);
          dc.noalias() = weights.transpose() * grad_tile;
          col2im_add(dcol.data(), g, oy0, oy1, dx.data() + n * in_stride);
        }
      }
    }
  });
}

Var conv2d_same(const Var& input, const Var& kernel, const Var& bias) {
  const int k = kernel.shape().h;
  if (k % 2 == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "conv2d: 'same' padding needs an odd kernel, got " +
                    kernel.shape().str());
  }
  return conv2d(input, kernel, bias, 1, (k - 1) / 2);
}

// ---------------------------------------------------------------------------
// activations

namespace {
double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var relu(const Var& input) {
  Tensor out(input.shape());
  const auto x = input.value().data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return ag::record(std::move(out), {input}, [](ag::Node& self) {
    const auto g = self.value.grad();
    const auto x = self.inputs[0]->value.data();
    auto dx = ag::input_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) dx[i] += g[i];
    }
  });
}

Var sigmoid(const Var& input) {
  Tensor out(input.shape());
  const auto x = input.value().data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
  return ag::record(std::move(out), {input}, [](ag::Node& self) {
    const auto g = self.value.grad();
    const auto y = self.value.data();
    auto dx = ag::input_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      dx[i] += g[i] * y[i] * (1.0 - y[i]);
    }
  });
}

Var activation(const Var& input, Activation kind) {
  return kind == Activation::kRelu ? relu(input) : sigmoid(input);
}

// ---------------------------------------------------------------------------
// reductions

Var reduce(const Var& input, Reduction kind) {
  const Shape s = input.shape();
  if (s.numel() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "reduce: empty tensor");
  }
  const std::size_t plane = s.plane();
  const auto x = input.value().data();

  if (kind == Reduction::kGlobalAvgPerChannel) {
    Tensor out(Shape{s.n, s.c, 1, 1});
    for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p) {
      ExactSum acc;
      const double* src = x.data() + p * plane;
      for (std::size_t i = 0; i < plane; ++i) acc.add(src[i]);
      out[p] = acc.mean(plane);
    }
    return ag::record(std::move(out), {input}, [plane](ag::Node& self) {
      const auto g = self.value.grad();
      auto dx = ag::input_grad(self, 0);
      for (std::size_t p = 0; p < g.size(); ++p) {
        const double share = g[p] / static_cast<double>(plane);
        double* d = dx.data() + p * plane;
        for (std::size_t i = 0; i < plane; ++i) d[i] += share;
      }
    });
  }

  Tensor out(Shape{s.n, 1, s.h, s.w});
  if (kind == Reduction::kChannelMeanMap) {
    for (int n = 0; n < s.n; ++n) {
      double* dst = out.data().data() + n * plane;
      for (int c = 0; c < s.c; ++c) {
        const double* src = x.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
      }
      for (std::size_t i = 0; i < plane; ++i) dst[i] /= s.c;
    }
    return ag::record(std::move(out), {input}, [s, plane](ag::Node& self) {
      const auto g = self.value.grad();
      auto dx = ag::input_grad(self, 0);
      for (int n = 0; n < s.n; ++n) {
        const double* go = g.data() + n * plane;
        for (int c = 0; c < s.c; ++c) {
          double* d = dx.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) d[i] += go[i] / s.c;
        }
      }
    });
  }

  // Channel max map; remember the winning channel for the backward pass.
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(s.n) * plane, 0);
  for (int n = 0; n < s.n; ++n) {
    double* dst = out.data().data() + n * plane;
    int* arg = argmax->data() + n * plane;
    const double* base = x.data() + static_cast<std::size_t>(n) * s.c * plane;
    std::copy(base, base + plane, dst);
    for (int c = 1; c < s.c; ++c) {
      const double* src = base + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (src[i] > dst[i]) {
          dst[i] = src[i];
          arg[i] = c;
        }
      }
    }
  }
  return ag::record(std::move(out), {input}, [s, plane, argmax](ag::Node& self) {
    const auto g = self.value.grad();
    auto dx = ag::input_grad(self, 0);
    for (int n = 0; n < s.n; ++n) {
      for (std::size_t i = 0; i < plane; ++i) {
        const int c = (*argmax)[n * plane + i];
        dx[(static_cast<std::size_t>(n) * s.c + c) * plane + i] += g[n * plane + i];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// layout

Var concat_channels(const Var& a, const Var& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    shape_error("concat_channels", "cannot concatenate " + sa.str() + " and " +
                                       sb.str());
  }
  Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t ca = sa.c * sa.plane();
  const std::size_t cb = sb.c * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    double* dst = out.data().data() + n * (ca + cb);
    std::copy_n(a.value().data().data() + n * ca, ca, dst);
    std::copy_n(b.value().data().data() + n * cb, cb, dst + ca);
  }
  return ag::record(std::move(out), {a, b}, [sa, ca, cb](ag::Node& self) {
    const auto g = self.value.grad();
    auto da = ag::input_grad(self, 0);
    auto db = ag::input_grad(self, 1);
    for (int n = 0; n < sa.n; ++n) {
      const double* src = g.data() + n * (ca + cb);
      if (!da.empty()) {
        for (std::size_t i = 0; i < ca; ++i) da[n * ca + i] += src[i];
      }
      if (!db.empty()) {
        for (std::size_t i = 0; i < cb; ++i) db[n * cb + i] += src[ca + i];
      }
    }
  });
}

Var slice_channels(const Var& input, int begin, int count) {
  const Shape s = input.shape();
  if (begin < 0 || count < 1 || begin + count > s.c) {
    shape_error("slice_channels", "channels [" + std::to_string(begin) + ", " +
                                      std::to_string(begin + count) +
                                      ") outside " + s.str());
  }
  const std::size_t plane = s.plane();
  Tensor out(Shape{s.n, count, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(input.value().data().data() +
                    (static_cast<std::size_t>(n) * s.c + begin) * plane,
                count * plane, out.data().data() + n * count * plane);
  }
  return ag::record(std::move(out), {input},
                    [s, begin, count, plane](ag::Node& self) {
                      const auto g = self.value.grad();
                      auto dx = ag::input_grad(self, 0);
                      for (int n = 0; n < s.n; ++n) {
                        const double* src = g.data() + n * count * plane;
                        double* dst = dx.data() + (static_cast<std::size_t>(n) * s.c + begin) * plane;
                        for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
                      }
                    });
}

Var reshape(const Var& input, Shape shape) {
  if (shape.numel() != input.shape().numel()) {
    shape_error("reshape", "cannot view " + input.shape().str() + " as " +
                               shape.str());
  }
  Tensor out(shape, std::vector<double>(input.value().data().begin(),
                                        input.value().data().end()));
  return ag::record(std::move(out), {input}, [](ag::Node& self) {
    const auto g = self.value.grad();
    auto dx = ag::input_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// elementwise

namespace {

template <typename Fwd, typename Bwd>
Var binary(const std::string& name, const Var& a, const Var& b, Fwd fwd,
           Bwd bwd) {
  expect_same(name, a, b);
  Tensor out(a.shape());
  const auto x = a.value().data();
  const auto y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i], y[i]);
  return ag::record(std::move(out), {a, b}, [bwd](ag::Node& self) {
    const auto g = self.value.grad();
    const auto x = self.inputs[0]->value.data();
    const auto y = self.inputs[1]->value.data();
    auto da = ag::input_grad(self, 0);
    auto db = ag::input_grad(self, 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto [ga, gb] = bwd(x[i], y[i]);
      if (!da.empty()) da[i] += g[i] * ga;
      if (!db.empty()) db[i] += g[i] * gb;
    }
  });
}

template <typename Fwd, typename Bwd>
Var unary(const Var& input, Fwd fwd, Bwd bwd) {
  Tensor out(input.shape());
  const auto x = input.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i]);
  return ag::record(std::move(out), {input}, [bwd](ag::Node& self) {
    const auto g = self.value.grad();
    const auto x = self.inputs[0]->value.data();
    const auto y = self.value.data();
    auto dx = ag::input_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * bwd(x[i], y[i]);
  });
}

using Pair = std::pair<double, double>;

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary("add", a, b, [](double x, double y) { return x + y; },
                [](double, double) { return Pair{1.0, 1.0}; });
}

Var sub(const Var& a, const Var& b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; },
                [](double, double) { return Pair{1.0, -1.0}; });
}

Var mul(const Var& a, const Var& b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; },
                [](double x, double y) { return Pair{y, x}; });
}

Var maximum(const Var& a, const Var& b) {
  return binary("maximum", a, b,
                [](double x, double y) { return x >= y ? x : y; },
                [](double x, double y) {
                  return x >= y ? Pair{1.0, 0.0} : Pair{0.0, 1.0};
                });
}

Var scale(const Var& input, double factor) {
  return unary(input, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Var add_scalar(const Var& input, double value) {
  return unary(input, [value](double x) { return x + value; },
               [](double, double) { return 1.0; });
}

Var square(const Var& input) {
  return unary(input, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var sqrt(const Var& input) {
  return unary(input, [](double x) { return std::sqrt(x); },
               [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

// ---------------------------------------------------------------------------
// broadcasts

namespace {

enum class ChannelOp { kAdd, kSub, kMul, kDiv };

Var channel_broadcast(const std::string& name, const Var& input,
                      const Var& per_channel, ChannelOp op) {
  expect_per_channel(name, input, per_channel);
  const Shape s = input.shape();
  const std::size_t plane = s.plane();
  Tensor out(s);
  const auto x = input.value().data();
  const auto p = per_channel.value().data();
  auto o = out.data();
  for (std::size_t nc = 0; nc < p.size(); ++nc) {
    const double v = p[nc];
    const double* src = x.data() + nc * plane;
    double* dst = o.data() + nc * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      switch (op) {
        case ChannelOp::kAdd: dst[i] = src[i] + v; break;
        case ChannelOp::kSub: dst[i] = src[i] - v; break;
        case ChannelOp::kMul: dst[i] = src[i] * v; break;
        case ChannelOp::kDiv: dst[i] = src[i] / v; break;
      }
    }
  }
  return ag::record(std::move(out), {input, per_channel},
                    [plane, op](ag::Node& self) {
    const auto g = self.value.grad();
    const auto x = self.inputs[0]->value.data();
    const auto p = self.inputs[1]->value.data();
    const auto y = self.value.data();
    auto dx = ag::input_grad(self, 0);
    auto dp = ag::input_grad(self, 1);
    for (std::size_t nc = 0; nc < p.size(); ++nc) {
      const double v = p[nc];
      double acc = 0.0;
      for (std::size_t i = nc * plane; i < (nc + 1) * plane; ++i) {
        switch (op) {
          case ChannelOp::kAdd:
            if (!dx.empty()) dx[i] += g[i];
            acc += g[i];
            break;
          case ChannelOp::kSub:
            if (!dx.empty()) dx[i] += g[i];
            acc -= g[i];
            break;
          case ChannelOp::kMul:
            if (!dx.empty()) dx[i] += g[i] * v;
            acc += g[i] * x[i];
            break;
          case ChannelOp::kDiv:
            if (!dx.empty()) dx[i] += g[i] / v;
            acc -= g[i] * y[i] / v;
            break;
        }
      }
      if (!dp.empty()) dp[nc] += acc;
    }
  });
}

}  // namespace

Var add_channel(const Var& input, const Var& per_channel) {
  return channel_broadcast("add_channel", input, per_channel, ChannelOp::kAdd);
}
Var sub_channel(const Var& input, const Var& per_channel) {
  return channel_broadcast("sub_channel", input, per_channel, ChannelOp::kSub);
}
Var mul_channel(const Var& input, const Var& per_channel) {
  return channel_broadcast("mul_channel", input, per_channel, ChannelOp::kMul);
}
Var div_channel(const Var& input, const Var& per_channel) {
  return channel_broadcast("div_channel", input, per_channel, ChannelOp::kDiv);
}

Var mul_spatial(const Var& input, const Var& map) {
  const Shape s = input.shape();
  if (map.shape() != Shape{s.n, 1, s.h, s.w}) {
    shape_error("mul_spatial", "map " + map.shape().str() +
                                   " does not broadcast over " + s.str());
  }
  const std::size_t plane = s.plane();
  Tensor out(s);
  const auto x = input.value().data();
  const auto m = map.value().data();
  for (int n = 0; n < s.n; ++n) {
    const double* mp = m.data() + n * plane;
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out[base + i] = x[base + i] * mp[i];
      }
    }
  }
  return ag::record(std::move(out), {input, map}, [s, plane](ag::Node& self) {
    const auto g = self.value.grad();
    const auto x = self.inputs[0]->value.data();
    const auto m = self.inputs[1]->value.data();
    auto dx = ag::input_grad(self, 0);
    auto dm = ag::input_grad(self, 1);
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          if (!dx.empty()) dx[base + i] += g[base + i] * m[n * plane + i];
          if (!dm.empty()) dm[n * plane + i] += g[base + i] * x[base + i];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// fusion primitives

Var pair_softmax(const Var& x, const Var& y, double temperature) {
  expect_same("pair_softmax", x, y);
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "pair_softmax: temperature must be positive");
  }
  Tensor out(x.shape());
  const auto a = x.value().data();
  const auto b = y.value().data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double sa = a[i] / temperature;
    const double sb = b[i] / temperature;
    const double top = std::max(sa, sb);
    const double ea = std::exp(sa - top);
    const double eb = std::exp(sb - top);
    out[i] = std::clamp(ea / (ea + eb), kWeightFloor, 1.0 - kWeightFloor);
  }
  return ag::record(std::move(out), {x, y}, [temperature](ag::Node& self) {
    const auto g = self.value.grad();
    const auto w = self.value.data();
    auto dx = ag::input_grad(self, 0);
    auto dy = ag::input_grad(self, 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (w[i] <= kWeightFloor || w[i] >= 1.0 - kWeightFloor) continue;
      const double d = g[i] * w[i] * (1.0 - w[i]) / temperature;
      if (!dx.empty()) dx[i] += d;
      if (!dy.empty()) dy[i] -= d;
    }
  });
}

Var weighted_fuse(const Var& a, const Var& b, const Var& w1, const Var& w2,
                  const Var& b1, const Var& b2) {
  expect_same("weighted_fuse", a, b);
  for (const Var* p : {&w1, &w2, &b1, &b2}) {
    expect_per_channel("weighted_fuse", a, *p);
  }
  const Shape s = a.shape();
  const std::size_t plane = s.plane();
  Tensor out(s);
  const auto fa = a.value().data();
  const auto fb = b.value().data();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    const double wa = w1.value()[nc];
    const double wb = w2.value()[nc];
    const double bias = b1.value()[nc] + b2.value()[nc];
    for (std::size_t i = nc * plane; i < (nc + 1) * plane; ++i) {
      out[i] = (wa * fa[i] + wb * fb[i]) + bias;
    }
  }
  return ag::record(
      std::move(out), {a, b, w1, w2, b1, b2}, [plane](ag::Node& self) {
        const auto g = self.value.grad();
        const auto fa = self.inputs[0]->value.data();
        const auto fb = self.inputs[1]->value.data();
        const auto wa = self.inputs[2]->value.data();
        const auto wb = self.inputs[3]->value.data();
        auto da = ag::input_grad(self, 0);
        auto db = ag::input_grad(self, 1);
        auto dwa = ag::input_grad(self, 2);
        auto dwb = ag::input_grad(self, 3);
        auto db1 = ag::input_grad(self, 4);
        auto db2 = ag::input_grad(self, 5);
        for (std::size_t nc = 0; nc < wa.size(); ++nc) {
          double ga = 0.0, gb = 0.0, gs = 0.0;
          for (std::size_t i = nc * plane; i < (nc + 1) * plane; ++i) {
            if (!da.empty()) da[i] += g[i] * wa[nc];
            if (!db.empty()) db[i] += g[i] * wb[nc];
            ga += g[i] * fa[i];
            gb += g[i] * fb[i];
            gs += g[i];
          }
          if (!dwa.empty()) dwa[nc] += ga;
          if (!dwb.empty()) dwb[nc] += gb;
          if (!db1.empty()) db1[nc] += gs;
          if (!db2.empty()) db2[nc] += gs;
        }
      });
}

// ---------------------------------------------------------------------------
// scalar reductions and losses

Var sum(const Var& input) {
  Tensor out(Shape{1, 1, 1, 1});
  double acc = 0.0;
  for (double v : input.value().data()) acc += v;
  out[0] = acc;
  return ag::record(std::move(out), {input}, [](ag::Node& self) {
    const double g = self.value.grad()[0];
    auto dx = ag::input_grad(self, 0);
    for (double& d : dx) d += g;
  });
}

Var mean(const Var& input) {
  const double count = static_cast<double>(input.value().numel());
  return scale(sum(input), 1.0 / count);
}

Var l1_loss(const Var& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    shape_error("l1_loss", "prediction " + pred.shape().str() +
                               " vs target " + target.shape().str());
  }
  const auto p = pred.value().data();
  const auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
  Tensor out(Shape{1, 1, 1, 1});
  out[0] = acc / static_cast<double>(p.size());
  auto target_copy = std::make_shared<Tensor>(target);
  return ag::record(std::move(out), {pred}, [target_copy](ag::Node& self) {
    const double g = self.value.grad()[0];
    const auto p = self.inputs[0]->value.data();
    const auto t = target_copy->data();
    auto dx = ag::input_grad(self, 0);
    const double share = g / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - t[i];
      if (d > 0.0) dx[i] += share;
      else if (d < 0.0) dx[i] -= share;
    }
  });
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

const std::array<double, kSsimWindow>& gaussian_taps() {
  static const std::array<double, kSsimWindow> taps = [] {
    std::array<double, kSsimWindow> t{};
    double total = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double d = i - kSsimWindow / 2;
      t[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
      total += t[i];
    }
    for (double& v : t) v /= total;
    return t;
  }();
  return taps;
}

// Separable 'valid' Gaussian filter: (h, w) -> (h - 10, w - 10).
void filter_valid(const double* src, int h, int w, double* dst,
                  std::vector<double>& tmp) {
  const auto& g = gaussian_taps();
  const int vw = w - kSsimWindow + 1;
  const int vh = h - kSsimWindow + 1;
  tmp.assign(static_cast<std::size_t>(h) * vw, 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = src + static_cast<std::size_t>(y) * w;
    double* t = tmp.data() + static_cast<std::size_t>(y) * vw;
    for (int x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) acc += g[i] * row[x + i];
      t[x] = acc;
    }
  }
  for (int y = 0; y < vh; ++y) {
    double* d = dst + static_cast<std::size_t>(y) * vw;
    std::fill(d, d + vw, 0.0);
    for (int j = 0; j < kSsimWindow; ++j) {
      const double* t = tmp.data() + static_cast<std::size_t>(y + j) * vw;
      for (int x = 0; x < vw; ++x) d[x] += g[j] * t[x];
    }
  }
}

// Adjoint of filter_valid, accumulated into `dst` (h, w).
void filter_valid_adjoint_add(const double* src, int h, int w, double* dst,
                              std::vector<double>& tmp) {
  const auto& g = gaussian_taps();
  const int vw = w - kSsimWindow + 1;
  const int vh = h - kSsimWindow + 1;
  tmp.assign(static_cast<std::size_t>(h) * vw, 0.0);
  for (int y = 0; y < vh; ++y) {
    const double* s = src + static_cast<std::size_t>(y) * vw;
    for (int j = 0; j < kSsimWindow; ++j) {
      double* t = tmp.data() + static_cast<std::size_t>(y + j) * vw;
      for (int x = 0; x < vw; ++x) t[x] += g[j] * s[x];
    }
  }
  for (int y = 0; y < h; ++y) {
    const double* t = tmp.data() + static_cast<std::size_t>(y) * vw;
    double* d = dst + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < vw; ++x) {
      for (int i = 0; i < kSsimWindow; ++i) d[x + i] += g[i] * t[x];
    }
  }
}

struct SsimMoments {
  std::vector<double> mx, my, mxx, myy, mxy;
};

SsimMoments ssim_moments(const double* x, const double* y, int h, int w) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const std::size_t valid =
      static_cast<std::size_t>(h - kSsimWindow + 1) * (w - kSsimWindow + 1);
  std::vector<double> xx(n), yy(n), xy(n), tmp;
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  SsimMoments m;
  for (auto* v : {&m.mx, &m.my, &m.mxx, &m.myy, &m.mxy}) v->resize(valid);
  filter_valid(x, h, w, m.mx.data(), tmp);
  filter_valid(y, h, w, m.my.data(), tmp);
  filter_valid(xx.data(), h, w, m.mxx.data(), tmp);
  filter_valid(yy.data(), h, w, m.myy.data(), tmp);
  filter_valid(xy.data(), h, w, m.mxy.data(), tmp);
  return m;
}

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

}  // namespace

Var ssim_loss(const Var& pred, const Tensor& target) {
  const Shape s = pred.shape();
  if (s != target.shape()) {
    shape_error("ssim_loss", "prediction " + s.str() + " vs target " +
                                 target.shape().str());
  }
  if (s.h < kSsimWindow || s.w < kSsimWindow) {
    throw Error(ErrorKind::kInvalidArgument,
                "ssim_loss: image " + s.str() + " smaller than the 11x11 window");
  }
  const std::size_t plane = s.plane();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const std::size_t valid =
      static_cast<std::size_t>(s.h - kSsimWindow + 1) * (s.w - kSsimWindow + 1);
  double total = 0.0;
  for (std::size_t p = 0; p < planes; ++p) {
    const auto m = ssim_moments(pred.value().data().data() + p * plane,
                                target.data().data() + p * plane, s.h, s.w);
    double acc = 0.0;
    for (std::size_t i = 0; i < valid; ++i) {
      const double vx = m.mxx[i] - m.mx[i] * m.mx[i];
      const double vy = m.myy[i] - m.my[i] * m.my[i];
      const double cxy = m.mxy[i] - m.mx[i] * m.my[i];
      acc += ((2.0 * m.mx[i] * m.my[i] + kC1) * (2.0 * cxy + kC2)) /
             ((m.mx[i] * m.mx[i] + m.my[i] * m.my[i] + kC1) * (vx + vy + kC2));
    }
    total += 1.0 - acc / static_cast<double>(valid);
  }
  Tensor out(Shape{1, 1, 1, 1});
  out[0] = total / static_cast<double>(planes);

  auto target_copy = std::make_shared<Tensor>(target);
  return ag::record(std::move(out), {pred}, [s, target_copy](ag::Node& self) {
    const double g = self.value.grad()[0];
    auto dx = ag::input_grad(self, 0);
    const std::size_t plane = s.plane();
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    const int vh = s.h - kSsimWindow + 1;
    const int vw = s.w - kSsimWindow + 1;
    const std::size_t valid = static_cast<std::size_t>(vh) * vw;
    const double ds = -g / (static_cast<double>(valid) * planes);
    std::vector<double> d1(valid), d2(valid), d3(valid), tmp;
    std::vector<double> u1(plane), u2(plane), u3(plane);
    for (std::size_t p = 0; p < planes; ++p) {
      const double* x = self.inputs[0]->value.data().data() + p * plane;
      const double* y = target_copy->data().data() + p * plane;
      const auto m = ssim_moments(x, y, s.h, s.w);
      for (std::size_t i = 0; i < valid; ++i) {
        const double mx = m.mx[i], my = m.my[i];
        const double vx = m.mxx[i] - mx * mx;
        const double vy = m.myy[i] - my * my;
        const double cxy = m.mxy[i] - mx * my;
        const double a1 = 2.0 * mx * my + kC1;
        const double a2 = 2.0 * cxy + kC2;
        const double b1 = mx * mx + my * my + kC1;
        const double b2 = vx + vy + kC2;
        const double ssim = a1 * a2 / (b1 * b2);
        d1[i] = ds * (2.0 * my * a2 / (b1 * b2) - 2.0 * mx * ssim / b1 +
                      2.0 * mx * ssim / b2 - 2.0 * my * a1 / (b1 * b2));
        d2[i] = ds * (-ssim / b2);
        d3[i] = ds * (2.0 * a1 / (b1 * b2));
      }
      std::fill(u1.begin(), u1.end(), 0.0);
      std::fill(u2.begin(), u2.end(), 0.0);
      std::fill(u3.begin(), u3.end(), 0.0);
      filter_valid_adjoint_add(d1.data(), s.h, s.w, u1.data(), tmp);
      filter_valid_adjoint_add(d2.data(), s.h, s.w, u2.data(), tmp);
      filter_valid_adjoint_add(d3.data(), s.h, s.w, u3.data(), tmp);
      double* d = dx.data() + p * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        d[i] += u1[i] + 2.0 * x[i] * u2[i] + y[i] * u3[i];
      }
    }
  });
}

}  // namespace ttfuse::ops
