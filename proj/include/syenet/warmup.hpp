// SPDX-License-Identifier: Apache-2.0
//
// Masked-reconstruction warm-up: hide a random subset of non-overlapping square
// tokens in the input and train the network to restore them.
#pragma once

#include <cstdint>

#include "syenet/tensor.hpp"

namespace sye {

struct MaskSpec {
  std::size_t token_size = 3;
  double target_fraction = 1.0 / 3.0;
  double fill_value = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

template <typename T>
struct MaskedInput {
  Tensor<T> masked;
  Tensor<T> mask;  // n x 1 x h x w, 1 where hidden
};

/// Tokens tile the image from the top-left corner; leftover border rows and columns
/// are never masked. round(fraction * h * w / token^2) tokens are drawn per sample
/// without replacement. Every channel of a chosen token is set to fill_value.
template <typename T>
MaskedInput<T> warmup_mask(const Tensor<T>& input, const MaskSpec& spec);

/// Nearest-neighbour enlargement of a mask by an integer factor.
template <typename T>
Tensor<T> upsample_mask(const Tensor<T>& mask, std::size_t factor);

/// Fraction of non-zero mask entries.
template <typename T>
double mask_fraction(const Tensor<T>& mask);

}  // namespace sye
