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

#include "ttfuse/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <string>

#include "ttfuse/error.hpp"

namespace ttfuse {
namespace {

void require_same_size(const GrayImage& x, const GrayImage& y,
                       const char* what) {
  if (x.width != y.width || x.height != y.height) {
    throw Error(ErrorKind::kShapeMismatch,
                std::string(what) + ": image sizes differ (" +
                    std::to_string(x.width) + "x" + std::to_string(x.height) +
                    " vs " + std::to_string(y.width) + "x" +
                    std::to_string(y.height) + ")");
  }
  if (x.pixels.empty()) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + ": empty image");
  }
}

std::vector<double> scaled(const GrayImage& image) {
  std::vector<double> out(image.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = image.pixels[i] * 255.0;
  return out;
}

double entropy_of(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

// ---- phase congruency ----------------------------------------------------

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftBuffer {
  explicit FftBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data) throw Error(ErrorKind::kNumeric, "fftw_malloc failed");
  }
  ~FftBuffer() { fftw_free(data); }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  fftw_complex* data;
};

class FftPlans {
 public:
  FftPlans(int rows, int cols, fftw_complex* scratch_in,
           fftw_complex* scratch_out) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_2d(rows, cols, scratch_in, scratch_out,
                                FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_2d(rows, cols, scratch_in, scratch_out,
                                 FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!forward_ || !backward_) {
      throw Error(ErrorKind::kNumeric, "FFTW planning failed");
    }
  }
  ~FftPlans() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  void forward(fftw_complex* in, fftw_complex* out) const {
    fftw_execute_dft(forward_, in, out);
  }
  void backward(fftw_complex* in, fftw_complex* out) const {
    fftw_execute_dft(backward_, in, out);
  }

 private:
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

// Normalised frequency coordinate of FFT bin i (DC at 0), matching the
// shifted grid of the reference implementation.
double freq_coord(int i, int n) {
  const int shifted = i < (n + 1) / 2 ? i : i - n;
  if (n % 2) return static_cast<double>(shifted) / (n - 1);
  return static_cast<double>(shifted) / n;
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (n % 2) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return (lower + upper) / 2.0;
}

constexpr int kScales = 4;
constexpr int kOrientations = 4;
constexpr double kMinWavelength = 6.0;
constexpr double kScaleMult = 2.0;
constexpr double kSigmaOnf = 0.55;
constexpr double kThetaOnSigma = 1.2;
constexpr double kNoiseK = 2.0;
constexpr double kPcEpsilon = 1e-4;
constexpr double kLowpassCutoff = 0.45;
constexpr int kLowpassOrder = 15;

// Mean box filter of size f (zero padded, centred as conv2 'same') followed
// by subsampling every f-th pixel.
std::vector<double> downsample(const std::vector<double>& src, int w, int h,
                               int f, int& out_w, int& out_h) {
  if (f == 1) {
    out_w = w;
    out_h = h;
    return src;
  }
  const int after = f / 2;
  const int before = f - 1 - after;
  out_w = (w + f - 1) / f;
  out_h = (h + f - 1) / f;
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h, 0.0);
  const double norm = 1.0 / (f * f);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const int cy = oy * f, cx = ox * f;
      double s = 0.0;
      for (int dy = -before; dy <= after; ++dy) {
        for (int dx = -before; dx <= after; ++dx) {
          const int y = cy + dy, x = cx + dx;
          if (y >= 0 && y < h && x >= 0 && x < w) {
            s += src[static_cast<std::size_t>(y) * w + x];
          }
        }
      }
      out[static_cast<std::size_t>(oy) * out_w + ox] = s * norm;
    }
  }
  return out;
}

std::vector<double> scharr_magnitude(const std::vector<double>& img, int w,
                                     int h) {
  auto px = [&](int x, int y) {
    return (x < 0 || y < 0 || x >= w || y >= h)
               ? 0.0
               : img[static_cast<std::size_t>(y) * w + x];
  };
  std::vector<double> out(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (3 * (px(x + 1, y - 1) - px(x - 1, y - 1)) +
                         10 * (px(x + 1, y) - px(x - 1, y)) +
                         3 * (px(x + 1, y + 1) - px(x - 1, y + 1))) /
                        16.0;
      const double gy = (3 * (px(x - 1, y + 1) - px(x - 1, y - 1)) +
                         10 * (px(x, y + 1) - px(x, y - 1)) +
                         3 * (px(x + 1, y + 1) - px(x + 1, y - 1))) /
                        16.0;
      out[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

}  // namespace

// ---- PSNR / SSIM ---------------------------------------------------------

double psnr(const GrayImage& x, const GrayImage& y) {
  require_same_size(x, y, "psnr");
  double sse = 0.0;
  for (std::size_t i = 0; i < x.pixels.size(); ++i) {
    const double d = 255.0 * (x.pixels[i] - y.pixels[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(x.pixels.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double psnr(const GrayImage& fused, const GrayImage& a, const GrayImage& b) {
  return (psnr(fused, a) + psnr(fused, b)) / 2.0;
}

double ssim(const GrayImage& x, const GrayImage& y) {
  require_same_size(x, y, "ssim");
  if (x.width < kSsimWindow || x.height < kSsimWindow) {
    throw Error(ErrorKind::kInvalidArgument,
                "ssim: image " + std::to_string(x.width) + "x" +
                    std::to_string(x.height) + " is smaller than the " +
                    std::to_string(kSsimWindow) + "x" +
                    std::to_string(kSsimWindow) + " window");
  }
  constexpr int r = kSsimWindow / 2;
  double window[kSsimWindow][kSsimWindow];
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    for (int j = 0; j < kSsimWindow; ++j) {
      const double di = i - r, dj = j - r;
      window[i][j] = std::exp(-(di * di + dj * dj) / (2 * kSsimSigma * kSsimSigma));
      total += window[i][j];
    }
  }
  for (auto& row : window) {
    for (double& v : row) v /= total;
  }
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double c2 = (0.03 * 255) * (0.03 * 255);
  const auto xs = scaled(x);
  const auto ys = scaled(y);
  const int w = x.width;
  double sum = 0.0;
  long count = 0;
  for (int cy = r; cy < x.height - r; ++cy) {
    for (int cx = r; cx < w - r; ++cx) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kSsimWindow; ++i) {
        const std::size_t row = static_cast<std::size_t>(cy - r + i) * w;
        for (int j = 0; j < kSsimWindow; ++j) {
          const double g = window[i][j];
          const double a = xs[row + cx - r + j];
          const double b = ys[row + cx - r + j];
          mx += g * a;
          my += g * b;
          sxx += g * a * a;
          syy += g * b * b;
          sxy += g * a * b;
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      sum += ((2 * mx * my + c1) * (2 * cov + c2)) /
             ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double ssim(const GrayImage& fused, const GrayImage& a, const GrayImage& b) {
  return (ssim(fused, a) + ssim(fused, b)) / 2.0;
}

// ---- FMI -----------------------------------------------------------------

std::vector<int> gradient_bins(const GrayImage& image) {
  const int w = image.width, h = image.height;
  auto px = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return image.pixels[static_cast<std::size_t>(y) * w + x];
  };
  // Largest Sobel magnitude attainable for values in [0,1].
  const double max_magnitude = 4.0 * std::numbers::sqrt2;
  std::vector<int> bins(image.pixels.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      const double mag = std::sqrt(gx * gx + gy * gy);
      const int bin = static_cast<int>(std::floor(mag / max_magnitude * 256.0));
      bins[static_cast<std::size_t>(y) * w + x] = std::clamp(bin, 0, 255);
    }
  }
  return bins;
}

double normalized_mutual_information(const std::vector<int>& x,
                                     const std::vector<int>& y) {
  if (x.size() != y.size() || x.empty()) {
    throw Error(ErrorKind::kShapeMismatch,
                "mutual information: feature maps differ in size");
  }
  std::vector<double> hx(256, 0.0), hy(256, 0.0), hxy(256 * 256, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    hx[x[i]] += 1.0;
    hy[y[i]] += 1.0;
    hxy[static_cast<std::size_t>(x[i]) * 256 + y[i]] += 1.0;
  }
  const double n = static_cast<double>(x.size());
  const double ex = entropy_of(hx, n);
  const double ey = entropy_of(hy, n);
  if (ex + ey == 0.0) return 1.0;
  const double exy = entropy_of(hxy, n);
  const double mi = std::max(0.0, ex + ey - exy);
  return 2.0 * mi / (ex + ey);
}

double fmi(const GrayImage& fused, const GrayImage& a, const GrayImage& b) {
  require_same_size(fused, a, "fmi");
  require_same_size(fused, b, "fmi");
  const auto gf = gradient_bins(fused);
  return (normalized_mutual_information(gf, gradient_bins(a)) +
          normalized_mutual_information(gf, gradient_bins(b))) /
         2.0;
}

// ---- FSIM ----------------------------------------------------------------

std::vector<double> phase_congruency(const std::vector<double>& image,
                                     int width, int height) {
  const int rows = height, cols = width;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  FftBuffer spectrum(n), work(n), result(n);
  FftPlans plans(rows, cols, work.data, result.data);

  for (std::size_t i = 0; i < n; ++i) {
    work.data[i][0] = image[i];
    work.data[i][1] = 0.0;
  }
  plans.forward(work.data, spectrum.data);

  // Frequency grid in unshifted (FFT) order.
  std::vector<double> radius(n), sin_theta(n), cos_theta(n), lowpass(n);
  for (int r = 0; r < rows; ++r) {
    const double fy = freq_coord(r, rows);
    for (int c = 0; c < cols; ++c) {
      const double fx = freq_coord(c, cols);
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      const double rad = std::sqrt(fx * fx + fy * fy);
      lowpass[i] = 1.0 / (1.0 + std::pow(rad / kLowpassCutoff, 2 * kLowpassOrder));
      radius[i] = i == 0 ? 1.0 : rad;
      const double theta = std::atan2(-fy, fx);
      sin_theta[i] = std::sin(theta);
      cos_theta[i] = std::cos(theta);
    }
  }

  std::vector<std::vector<double>> log_gabor(kScales, std::vector<double>(n));
  const double log_sigma = std::log(kSigmaOnf);
  for (int s = 0; s < kScales; ++s) {
    const double fo = 1.0 / (kMinWavelength * std::pow(kScaleMult, s));
    for (std::size_t i = 0; i < n; ++i) {
      const double l = std::log(radius[i] / fo);
      log_gabor[s][i] = std::exp(-(l * l) / (2 * log_sigma * log_sigma)) * lowpass[i];
    }
    log_gabor[s][0] = 0.0;
  }

  const double theta_sigma = std::numbers::pi / kOrientations / kThetaOnSigma;
  std::vector<double> energy_all(n, 0.0), an_all(n, 0.0);
  std::vector<double> filter(n), sum_e(n), sum_o(n), sum_an(n), energy(n);
  std::vector<std::vector<std::complex<double>>> eo(
      kScales, std::vector<std::complex<double>>(n));
  std::vector<std::vector<double>> spatial_filter(kScales, std::vector<double>(n));

  for (int o = 0; o < kOrientations; ++o) {
    const double angle = o * std::numbers::pi / kOrientations;
    const double ca = std::cos(angle), sa = std::sin(angle);
    std::fill(sum_e.begin(), sum_e.end(), 0.0);
    std::fill(sum_o.begin(), sum_o.end(), 0.0);
    std::fill(sum_an.begin(), sum_an.end(), 0.0);
    std::fill(energy.begin(), energy.end(), 0.0);
    double em_n = 0.0;

    for (int s = 0; s < kScales; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        const double ds = sin_theta[i] * ca - cos_theta[i] * sa;
        const double dc = cos_theta[i] * ca + sin_theta[i] * sa;
        const double dtheta = std::abs(std::atan2(ds, dc));
        filter[i] = log_gabor[s][i] *
                    std::exp(-(dtheta * dtheta) / (2 * theta_sigma * theta_sigma));
      }
      // Spatial-domain filter, used for the noise estimate.
      for (std::size_t i = 0; i < n; ++i) {
        work.data[i][0] = filter[i];
        work.data[i][1] = 0.0;
      }
      plans.backward(work.data, result.data);
      for (std::size_t i = 0; i < n; ++i) {
        spatial_filter[s][i] = result.data[i][0] / static_cast<double>(n) * sqrt_n;
      }
      for (std::size_t i = 0; i < n; ++i) {
        work.data[i][0] = spectrum.data[i][0] * filter[i];
        work.data[i][1] = spectrum.data[i][1] * filter[i];
      }
      plans.backward(work.data, result.data);
      for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> v(result.data[i][0] / static_cast<double>(n),
                                     result.data[i][1] / static_cast<double>(n));
        eo[s][i] = v;
        sum_an[i] += std::abs(v);
        sum_e[i] += v.real();
        sum_o[i] += v.imag();
      }
      if (s == 0) {
        for (double f : filter) em_n += f * f;
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double x_energy =
          std::sqrt(sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]) + kPcEpsilon;
      const double mean_e = sum_e[i] / x_energy;
      const double mean_o = sum_o[i] / x_energy;
      double e = 0.0;
      for (int s = 0; s < kScales; ++s) {
        const double re = eo[s][i].real(), im = eo[s][i].imag();
        e += re * mean_e + im * mean_o - std::abs(re * mean_o - im * mean_e);
      }
      energy[i] = e;
    }

    std::vector<double> e2(n);
    for (std::size_t i = 0; i < n; ++i) e2[i] = std::norm(eo[0][i]);
    const double mean_e2n = -median_of(std::move(e2)) / std::log(0.5);
    const double noise_power = em_n > 0.0 ? mean_e2n / em_n : 0.0;

    double sum_an2 = 0.0, sum_aiaj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int si = 0; si < kScales; ++si) {
        const double fi = spatial_filter[si][i];
        sum_an2 += fi * fi;
        for (int sj = si + 1; sj < kScales; ++sj) sum_aiaj += fi * spatial_filter[sj][i];
      }
    }
    const double est_noise_energy2 =
        2 * noise_power * sum_an2 + 4 * noise_power * sum_aiaj;
    const double tau = std::sqrt(std::max(0.0, est_noise_energy2) / 2);
    const double est_noise_energy = tau * std::sqrt(std::numbers::pi / 2);
    const double est_noise_sigma = std::sqrt((2 - std::numbers::pi / 2) * tau * tau);
    const double threshold = (est_noise_energy + kNoiseK * est_noise_sigma) / 1.7;

    for (std::size_t i = 0; i < n; ++i) {
      energy_all[i] += std::max(energy[i] - threshold, 0.0);
      an_all[i] += sum_an[i];
    }
  }

  std::vector<double> pc(n);
  for (std::size_t i = 0; i < n; ++i) {
    pc[i] = an_all[i] > 0.0 ? energy_all[i] / an_all[i] : 0.0;
  }
  return pc;
}

double fsim(const GrayImage& x, const GrayImage& y) {
  require_same_size(x, y, "fsim");
  if (std::min(x.width, x.height) < kFsimMinSize) {
    throw Error(ErrorKind::kInvalidArgument,
                "fsim: image " + std::to_string(x.width) + "x" +
                    std::to_string(x.height) + " is below the minimum size " +
                    std::to_string(kFsimMinSize));
  }
  const int f = std::max(1, static_cast<int>(std::lround(
                                std::min(x.width, x.height) / 256.0)));
  int w = 0, h = 0;
  const auto y1 = downsample(scaled(x), x.width, x.height, f, w, h);
  const auto y2 = downsample(scaled(y), y.width, y.height, f, w, h);

  const auto pc1 = phase_congruency(y1, w, h);
  const auto pc2 = phase_congruency(y2, w, h);
  const auto g1 = scharr_magnitude(y1, w, h);
  const auto g2 = scharr_magnitude(y2, w, h);

  constexpr double t1 = 0.85;
  constexpr double t2 = 160.0;
  double num = 0.0, den = 0.0, plain = 0.0;
  for (std::size_t i = 0; i < pc1.size(); ++i) {
    const double pc_sim = (2.0 * pc1[i] * pc2[i] + t1) /
                          (pc1[i] * pc1[i] + pc2[i] * pc2[i] + t1);
    const double g_sim = (2.0 * g1[i] * g2[i] + t2) /
                         (g1[i] * g1[i] + g2[i] * g2[i] + t2);
    const double pcm = std::max(pc1[i], pc2[i]);
    num += g_sim * pc_sim * pcm;
    den += pcm;
    plain += g_sim * pc_sim;
  }
  // No phase-congruent structure in either image: unweighted mean.
  if (den == 0.0) return plain / static_cast<double>(pc1.size());
  return num / den;
}

double fsim(const GrayImage& fused, const GrayImage& a, const GrayImage& b) {
  return (fsim(fused, a) + fsim(fused, b)) / 2.0;
}

// ---- EN ------------------------------------------------------------------

std::array<double, 256> intensity_histogram(const GrayImage& image) {
  std::array<double, 256> hist{};
  for (double v : image.pixels) {
    const long level = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    hist[static_cast<std::size_t>(level)] += 1.0;
  }
  return hist;
}

double entropy(const GrayImage& image) {
  if (image.pixels.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "entropy: empty image");
  }
  const auto hist = intensity_histogram(image);
  return entropy_of(std::vector<double>(hist.begin(), hist.end()),
                    static_cast<double>(image.pixels.size()));
}

MetricReport evaluate(const GrayImage& fused, const GrayImage& a,
                      const GrayImage& b) {
  MetricReport report;
  report.psnr = psnr(fused, a, b);
  report.ssim = ssim(fused, a, b);
  report.fmi = fmi(fused, a, b);
  report.fsim = fsim(fused, a, b);
  report.en = entropy(fused);
  return report;
}

}  // namespace ttfuse
