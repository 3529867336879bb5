// SPDX-License-Identifier: Apache-2.0
//
// Multi-branch ConvRep blocks and the fold that turns them into one convolution.
//
// A block runs N parallel branches (conv, optionally followed by batch norm),
// each producing R*c_out channels, concatenates them and mixes the result with a
// 1x1 conv back to c_out channels. Everything is linear, so the whole block is a
// single K x K convolution once batch norm uses its running statistics:
//
//   fold_bn       conv + BN            -> conv
//   pad_kernel    k x k                -> K x K (zero border, centre aligned)
//   fold_concat   N convs, concat      -> one conv with N*R*c_out outputs
//   fold_pointwise  conv, then 1x1     -> conv
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "syenet/rng.hpp"
#include "syenet/tensor.hpp"

namespace sye {

template <typename T>
struct BranchSpec {
  Conv2dParams<T> conv;
  std::optional<BatchNormParams<T>> bn;
};

template <typename T>
struct ConvRepBlock {
  std::vector<BranchSpec<T>> branches;
  Conv2dParams<T> pointwise;
  std::size_t nominal_kernel = 3;

  std::size_t c_in() const { return branches.front().conv.c_in(); }
  std::size_t c_out() const { return pointwise.c_out(); }
  std::size_t branch_channels() const { return branches.front().conv.c_out(); }

  /// Throws ShapeError / ConfigError when the block is not well formed.
  void validate() const;

  /// Inference-semantics forward (batch norm uses running statistics).
  Tensor<T> forward(const Tensor<T>& x) const;

  /// Trainable scalars: conv weights and biases, BN gamma and beta.
  std::size_t param_count() const;
};

template <typename T>
struct FoldedConv {
  Conv2dParams<T> conv;

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, conv); }
  std::size_t param_count() const { return conv.param_count(); }
};

/// One entry of a branch menu. kernel == 0 means "the block's nominal kernel";
/// other sizes are clamped to the nominal kernel.
struct BranchChoice {
  std::size_t kernel = 0;
  bool with_bn = false;

  std::size_t resolve(std::size_t nominal) const {
    return kernel == 0 ? nominal : (kernel < nominal ? kernel : nominal);
  }
  bool operator==(const BranchChoice&) const = default;
};

struct BlockLayout {
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t nominal_kernel = 3;
  std::size_t expansion = 1;
  std::vector<BranchChoice> menu;
};

/// Fresh block: uniform fan-in scaled weights, zero biases, identity batch norm.
template <typename T>
ConvRepBlock<T> make_block(const BlockLayout& layout, Rng& rng);

/// Replace batch norm gamma/beta/statistics with random values (for equivalence tests).
template <typename T>
void randomize_bn(ConvRepBlock<T>& block, Rng& rng);

template <typename T>
Conv2dParams<T> fold_bn(const Conv2dParams<T>& conv, const BatchNormParams<T>& bn);

template <typename T>
Conv2dParams<T> pad_kernel(const Conv2dParams<T>& conv, std::size_t target);

template <typename T>
Conv2dParams<T> fold_concat(const std::vector<Conv2dParams<T>>& branches);

template <typename T>
Conv2dParams<T> fold_pointwise(const Conv2dParams<T>& cat, const Conv2dParams<T>& pointwise);

template <typename T>
FoldedConv<T> reparameterize(const ConvRepBlock<T>& block);

struct EquivalenceReport {
  double max_abs_diff = 0.0;
  double tolerance = 0.0;
  std::size_t trials = 0;
  bool pass = false;
};

/// Runs `trials` random non-zero inputs through the block and the folded conv.
template <typename T>
EquivalenceReport verify_equivalence(const ConvRepBlock<T>& block, const FoldedConv<T>& folded,
                                     std::size_t trials, double tolerance,
                                     std::uint64_t seed = 0x5eed);

}  // namespace sye
