// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "syenet/tensor.hpp"

namespace sye {

constexpr double kPsnrCap = 100.0;

/// 10 log10(range^2 / MSE), capped at kPsnrCap.
template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& gt, double data_range = 1.0);

/// Mean SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, valid
/// region only, averaged over every (sample, channel) plane.
template <typename T>
double ssim(const Tensor<T>& pred, const Tensor<T>& gt, double data_range = 1.0);

struct ScoreParams {
  double c_norm = 0.0;
  double latency_ms = 0.0;
  void validate() const;
};

/// 2^(2 psnr) / (c_norm * latency_ms).
double mai_score(double psnr_db, const ScoreParams& params);

}  // namespace sye
