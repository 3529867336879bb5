// SPDX-License-Identifier: Apache-2.0
//
// Outlier-aware loss: an L_p loss reweighted per pixel by
//   w = 1 - exp(-alpha * |delta - mu|^p / b)
// where mu and b come from the residual population of the image.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "syenet/tensor.hpp"

namespace sye {

struct LossParams {
  double alpha = 1.0;  // uncalibrated default
  int p = 1;           // 1 or 2
  /// Statistics per image (true) or over the whole batch (false).
  bool per_image = true;

  void validate() const;
};

/// Population statistics of a residual set. b follows the norm order:
/// p = 1: 2 b^2 = sigma^2, p = 2: b = 2 sigma^2. sigma^2 == 0 marks it degenerate.
struct ResidualStats {
  double mu = 0.0;
  double sigma2 = 0.0;
  double b = 0.0;
  bool degenerate = true;
};

ResidualStats residual_stats(std::span<const double> delta, int p);

template <typename T>
struct DiffStats {
  Tensor<T> delta;
  ResidualStats stats;
};

/// Stats over every element of pred - gt.
template <typename T>
DiffStats<T> diff_stats(const Tensor<T>& pred, const Tensor<T>& gt, int p = 1);

/// Throws DegenerateError when stats.b == 0.
double oa_weight(double delta, const ResidualStats& stats, const LossParams& params);

/// One ResidualStats per sample (per_image) or a single entry for the batch.
template <typename T>
std::vector<ResidualStats> loss_stats(const Tensor<T>& pred, const Tensor<T>& gt,
                                      const LossParams& params);

/// Mean over all elements. Degenerate groups fall back to |delta|^p.
template <typename T>
double oa_loss(const Tensor<T>& pred, const Tensor<T>& gt, const LossParams& params);

/// Same with statistics supplied by the caller (held fixed, as the gradient assumes).
template <typename T>
double oa_loss_with_stats(const Tensor<T>& pred, const Tensor<T>& gt, const LossParams& params,
                          const std::vector<ResidualStats>& stats);

/// d(oa_loss)/d(pred) with mu and b treated as constants. sign(0) = 0.
template <typename T>
Tensor<T> oa_loss_grad(const Tensor<T>& pred, const Tensor<T>& gt, const LossParams& params);

template <typename T>
double lp_loss(const Tensor<T>& pred, const Tensor<T>& gt, int p);
template <typename T>
Tensor<T> lp_loss_grad(const Tensor<T>& pred, const Tensor<T>& gt, int p);

/// Masked L_p: mean over elements where mask != 0 (mask broadcast over channels
/// when it has a single channel). Returns 0 for an empty mask.
template <typename T>
double masked_lp_loss(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask, int p);
template <typename T>
Tensor<T> masked_lp_loss_grad(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask,
                              int p);

// ---------------------------------------------------------------------------
// Loss shape under a unit Laplacian residual (mu = 0, b = 1).

struct LossAnalysisRow {
  double x = 0.0;
  double alpha = 0.0;  // +inf marks the plain L_p reference curve
  double weight = 0.0;
  double loss = 0.0;
  double density = 0.0;     // loss(x) * pdf(x), normalised to unit area over the grid
  double cumulative = 0.0;  // running trapezoid integral of density, ends at 1
};

/// Uniform grid of `sample_count` points on |x| in [0, x_max] for every alpha,
/// followed by the L_p reference rows.
std::vector<LossAnalysisRow> loss_analysis_emit(const std::vector<double>& alphas, int p,
                                                std::size_t sample_count, double x_max = 10.0);

/// Header x,alpha,weight,loss,density,cumulative; the reference rows print alpha as inf.
void write_loss_analysis_csv(std::ostream& out, const std::vector<LossAnalysisRow>& rows);

}  // namespace sye
