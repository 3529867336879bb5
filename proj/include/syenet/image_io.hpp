// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "syenet/tensor.hpp"

namespace sye {

template <typename T>
struct PngImage {
  Tensor<T> pixels;  // 1 x C x H x W, C = 1 (gray) or 3 (RGB), values v / (2^bits - 1)
  int bit_depth = 8;
};

/// 8- or 16-bit grayscale or RGB only; anything else is a FormatError.
template <typename T>
PngImage<T> load_png(const std::string& path);

/// Quantises with round-half-up after clamping to [0, 1]. bit_depth is 8 or 16.
template <typename T>
void save_png(const std::string& path, const Tensor<T>& image, int bit_depth = 8);

/// RGGB mosaic 1 x 1 x 2h x 2w -> 1 x 4 x h x w with channels (R, G_r, G_b, B).
template <typename T>
Tensor<T> bayer_pack(const Tensor<T>& raw);
template <typename T>
Tensor<T> bayer_unpack(const Tensor<T>& packed);

}  // namespace sye
