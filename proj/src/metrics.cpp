// SPDX-License-Identifier: Apache-2.0
#include "syenet/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace sye {

template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& gt, double data_range) {
  if (pred.shape() != gt.shape()) throw ShapeError("psnr: shape mismatch");
  if (!(data_range > 0.0)) throw ConfigError("psnr: data range must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(pred.numel());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
}

namespace {

constexpr std::size_t kWin = 11;

std::array<double, kWin> gaussian_window() {
  std::array<double, kWin> g{};
  double total = 0.0;
  for (std::size_t i = 0; i < kWin; ++i) {
    const double x = static_cast<double>(i) - 5.0;
    g[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Separable valid-mode filter of an h x w plane.
std::vector<double> filter(const std::vector<double>& src, std::size_t h, std::size_t w,
                           const std::array<double, kWin>& g) {
  const std::size_t ho = h - kWin + 1;
  const std::size_t wo = w - kWin + 1;
  std::vector<double> rows(h * wo);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWin; ++k) acc += g[k] * src[y * w + x + k];
      rows[y * wo + x] = acc;
    }
  std::vector<double> out(ho * wo);
  for (std::size_t y = 0; y < ho; ++y)
    for (std::size_t x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWin; ++k) acc += g[k] * rows[(y + k) * wo + x];
      out[y * wo + x] = acc;
    }
  return out;
}

}  // namespace

template <typename T>
double ssim(const Tensor<T>& pred, const Tensor<T>& gt, double data_range) {
  if (pred.shape() != gt.shape()) throw ShapeError("ssim: shape mismatch");
  if (!(data_range > 0.0)) throw ConfigError("ssim: data range must be positive");
  if (pred.h() < kWin || pred.w() < kWin) {
    throw ShapeError("ssim: image " + to_string(pred.shape()) + " smaller than the 11x11 window");
  }
  const auto g = gaussian_window();
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  const std::size_t h = pred.h();
  const std::size_t w = pred.w();
  const std::size_t hw = h * w;
  double total = 0.0;
  std::vector<double> a(hw), b(hw), aa(hw), bb(hw), ab(hw);
  for (std::size_t n = 0; n < pred.n(); ++n) {
    for (std::size_t c = 0; c < pred.c(); ++c) {
      const T* pa = pred.plane(n, c);
      const T* pb = gt.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) {
        a[i] = static_cast<double>(pa[i]);
        b[i] = static_cast<double>(pb[i]);
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
      }
      const auto ma = filter(a, h, w, g);
      const auto mb = filter(b, h, w, g);
      const auto saa = filter(aa, h, w, g);
      const auto sbb = filter(bb, h, w, g);
      const auto sab = filter(ab, h, w, g);
      double plane = 0.0;
      for (std::size_t i = 0; i < ma.size(); ++i) {
        const double va = saa[i] - ma[i] * ma[i];
        const double vb = sbb[i] - mb[i] * mb[i];
        const double cov = sab[i] - ma[i] * mb[i];
        plane += ((2.0 * ma[i] * mb[i] + c1) * (2.0 * cov + c2)) /
                 ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
      }
      total += plane / static_cast<double>(ma.size());
    }
  }
  return total / static_cast<double>(pred.n() * pred.c());
}

void ScoreParams::validate() const {
  if (!(c_norm > 0.0)) throw ConfigError("score: normalisation constant must be positive");
  if (!(latency_ms > 0.0)) throw ConfigError("score: latency must be positive");
}

double mai_score(double psnr_db, const ScoreParams& params) {
  params.validate();
  return std::exp2(2.0 * psnr_db) / (params.c_norm * params.latency_ms);
}

template double psnr(const Tensor<float>&, const Tensor<float>&, double);
template double psnr(const Tensor<double>&, const Tensor<double>&, double);
template double ssim(const Tensor<float>&, const Tensor<float>&, double);
template double ssim(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace sye
