// SPDX-License-Identifier: Apache-2.0
//
// Procedural training data: smooth gradients, hard edges and oriented texture,
// degraded per task.
#pragma once

#include <cstdint>
#include <vector>

#include "syenet/network.hpp"
#include "syenet/rng.hpp"
#include "syenet/tensor.hpp"

namespace sye {

template <typename T>
struct Sample {
  Tensor<T> input;   // 1 x C x h x w
  Tensor<T> target;  // 1 x 3 x H x W
};

struct DatasetSpec {
  Task task = Task::sr;
  std::size_t scale = 2;  // SR only
  std::size_t count = 64;
  std::size_t patch = 32;  // target side
  std::uint64_t seed = 0;
  double isp_noise = 0.01;  // stddev of additive mosaic noise
  double lle_gamma = 2.2;
  double lle_gain = 0.25;

  void validate() const;
};

template <typename T>
struct Dataset {
  DatasetSpec spec;
  std::vector<Sample<T>> samples;
  std::size_t size() const { return samples.size(); }
};

/// 1 x 3 x h x w image in [0, 1].
template <typename T>
Tensor<T> synthetic_image(Rng& rng, std::size_t h, std::size_t w);

template <typename T>
Dataset<T> make_synthetic_dataset(const DatasetSpec& spec);

/// Mean over s x s blocks; h and w must be divisible by s.
template <typename T>
Tensor<T> box_downsample(const Tensor<T>& x, std::size_t s);

/// Keys cubic (a = -0.5), pixel centres at half-integers, replicated border.
template <typename T>
Tensor<T> resize_bicubic(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

/// RGB n x 3 x H x W to an RGGB mosaic n x 1 x H x W (H, W even).
template <typename T>
Tensor<T> mosaic_rggb(const Tensor<T>& rgb);

/// x -> gain * x^gamma.
template <typename T>
Tensor<T> darken(const Tensor<T>& rgb, double gamma, double gain);

enum class Augment { identity, hflip, vflip, rot90, rot180, rot270 };
constexpr std::size_t kAugmentCount = 6;

/// Spatial transform of every plane; rotations need square planes.
template <typename T>
Tensor<T> augment(const Tensor<T>& x, Augment a);

/// Transforms a pair consistently. For ISP the target is transformed and
/// re-mosaicked so the Bayer phase stays RGGB; the input noise pattern is carried along.
template <typename T>
Sample<T> augment_sample(const Sample<T>& s, Augment a, Task task);

/// Stacks samples along n.
template <typename T>
Tensor<T> stack(const std::vector<const Tensor<T>*>& parts);

}  // namespace sye
