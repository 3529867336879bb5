// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "syenet/tensor.hpp"

namespace sye {

/// floor + 0.5 (base - floor)(1 + cos(pi t / period)); t is clamped to the period.
/// A zero period means a constant rate.
inline double cosine_lr(double base, double floor, std::size_t t, std::size_t period) {
  if (period == 0) return base;
  const double frac = static_cast<double>(std::min(t, period)) / static_cast<double>(period);
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * frac));
}

struct AdamConfig {
  double lr = 1e-3;
  double lr_floor = 0.0;
  std::size_t period = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw ConfigError("adam betas must lie in (0, 1)");
    }
    if (!(lr >= 0.0) || !(lr_floor >= 0.0) || !(eps > 0.0)) {
      throw ConfigError("adam rates must be non-negative and eps positive");
    }
  }
};

/// Adam with bias correction. Step k (0-based) uses lr(k) from the cosine schedule
/// and bias-correction exponent k + 1.
template <typename T>
class AdamCosine {
 public:
  AdamCosine(AdamConfig config, const std::vector<Tensor<T>*>& params) : config_(config) {
    config_.validate();
    for (const auto* p : params) {
      m_.emplace_back(p->numel(), 0.0);
      v_.emplace_back(p->numel(), 0.0);
    }
  }

  std::size_t steps() const { return steps_; }
  double lr() const { return cosine_lr(config_.lr, config_.lr_floor, steps_, config_.period); }
  const AdamConfig& config() const { return config_; }

  void step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw ShapeError("adam: parameter list does not match optimizer state");
    }
    const double lr_t = lr();
    ++steps_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& p = *params[i];
      const Tensor<T>& g = grads[i];
      if (p.shape() != g.shape() || p.numel() != m_[i].size()) {
        throw ShapeError("adam: gradient shape " + to_string(g.shape()) + " for parameter " +
                         to_string(p.shape()));
      }
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.numel(); ++j) {
        const double gj = static_cast<double>(g[j]);
        m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * gj;
        v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * gj * gj;
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        p[j] = static_cast<T>(static_cast<double>(p[j]) - lr_t * mhat / (std::sqrt(vhat) + config_.eps));
      }
    }
  }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t steps_ = 0;
};

}  // namespace sye
