// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "syenet/dataset.hpp"
#include "syenet/loss.hpp"
#include "syenet/network.hpp"
#include "syenet/warmup.hpp"

namespace sye {

enum class LossKind { oa, l1 };

struct TrainConfig {
  std::size_t iterations = 2000;
  std::size_t batch = 4;
  double lr = 3e-3;
  double lr_floor = 1e-5;
  LossKind loss = LossKind::oa;
  LossParams loss_params;
  bool augment = true;
  double bn_momentum = 0.1;
  std::size_t val_every = 250;  // 0: only at the end
  std::uint64_t seed = 42;

  std::size_t warmup_iters = 0;
  double warmup_lr = 1e-6;
  MaskSpec mask;

  void validate() const;
};

struct TrainLogRow {
  std::size_t iter = 0;
  double lr = 0.0;
  double loss = 0.0;
  double val_psnr = std::numeric_limits<double>::quiet_NaN();  // NaN: not evaluated
};

template <typename T>
struct TrainResult {
  SyeNet<T> model;
  std::vector<TrainLogRow> log;
  std::vector<TrainLogRow> warmup_log;
  // Masked-reconstruction objective on a fixed probe batch, before and after warm-up.
  double warmup_before = std::numeric_limits<double>::quiet_NaN();
  double warmup_after = std::numeric_limits<double>::quiet_NaN();
  double val_psnr = std::numeric_limits<double>::quiet_NaN();
};

/// Mean PSNR of the clamped inference output over a dataset.
template <typename T>
double evaluate_psnr(const SyeNet<T>& model, const Dataset<T>& data);

/// Mean PSNR of bicubic upsampling (SR only).
template <typename T>
double bicubic_psnr(const Dataset<T>& data);

/// Warm-up objective: L1 over hidden pixels of the target, batch-statistics BN.
template <typename T>
double warmup_objective(const SyeNet<T>& model, const Tensor<T>& masked_input, const Tensor<T>& target,
                        const Tensor<T>& mask);

/// Warm-up (optional) then the main phase. `val` may be empty. Throws ModeError on a
/// folded model and ConfigError on an empty training set.
template <typename T>
TrainResult<T> train_toy(SyeNet<T> model, const Dataset<T>& train, const Dataset<T>& val,
                         const TrainConfig& config);

/// Header iter,lr,loss,val_psnr; val_psnr left blank where not evaluated.
void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& rows);

}  // namespace sye
