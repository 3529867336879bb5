// SPDX-License-Identifier: Apache-2.0
#include "syenet/warmup.hpp"

#include <cmath>
#include <numeric>

#include "syenet/rng.hpp"

namespace sye {

void MaskSpec::validate() const {
  if (token_size == 0) throw ConfigError("mask token size must be positive");
  if (!(target_fraction >= 0.0 && target_fraction <= 1.0)) {
    throw ConfigError("mask fraction must lie in [0, 1]");
  }
}

template <typename T>
MaskedInput<T> warmup_mask(const Tensor<T>& input, const MaskSpec& spec) {
  spec.validate();
  const std::size_t t = spec.token_size;
  if (input.h() < t || input.w() < t) {
    throw ShapeError("warmup_mask: image " + to_string(input.shape()) + " smaller than one token");
  }
  const std::size_t th = input.h() / t;
  const std::size_t tw = input.w() / t;
  const std::size_t tokens = th * tw;
  const double want = spec.target_fraction * static_cast<double>(input.h() * input.w()) /
                      static_cast<double>(t * t);
  const std::size_t count = std::min(tokens, static_cast<std::size_t>(std::llround(want)));

  MaskedInput<T> out{input, Tensor<T>(Shape{input.n(), 1, input.h(), input.w()})};
  Rng rng(spec.seed);
  std::vector<std::size_t> order(tokens);
  for (std::size_t n = 0; n < input.n(); ++n) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // partial Fisher-Yates
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.index(tokens - i);
      std::swap(order[i], order[j]);
      const std::size_t y0 = (order[i] / tw) * t;
      const std::size_t x0 = (order[i] % tw) * t;
      for (std::size_t y = y0; y < y0 + t; ++y)
        for (std::size_t x = x0; x < x0 + t; ++x) {
          out.mask(n, 0, y, x) = T(1);
          for (std::size_t c = 0; c < input.c(); ++c) {
            out.masked(n, c, y, x) = static_cast<T>(spec.fill_value);
          }
        }
    }
  }
  return out;
}

template <typename T>
Tensor<T> upsample_mask(const Tensor<T>& mask, std::size_t factor) {
  if (factor == 0) throw ConfigError("upsample factor must be positive");
  Tensor<T> out(Shape{mask.n(), mask.c(), mask.h() * factor, mask.w() * factor});
  for (std::size_t n = 0; n < out.n(); ++n)
    for (std::size_t c = 0; c < out.c(); ++c)
      for (std::size_t y = 0; y < out.h(); ++y)
        for (std::size_t x = 0; x < out.w(); ++x) out(n, c, y, x) = mask(n, c, y / factor, x / factor);
  return out;
}

template <typename T>
double mask_fraction(const Tensor<T>& mask) {
  std::size_t on = 0;
  for (T v : mask.data()) on += v != T(0);
  return static_cast<double>(on) / static_cast<double>(mask.numel());
}

template MaskedInput<float> warmup_mask(const Tensor<float>&, const MaskSpec&);
template MaskedInput<double> warmup_mask(const Tensor<double>&, const MaskSpec&);
template Tensor<float> upsample_mask(const Tensor<float>&, std::size_t);
template Tensor<double> upsample_mask(const Tensor<double>&, std::size_t);
template double mask_fraction(const Tensor<float>&);
template double mask_fraction(const Tensor<double>&);

}  // namespace sye
