// SPDX-License-Identifier: Apache-2.0
//
// Dense NCHW tensors and the primitive operations used by the network.
//
// All operations are pure functions of their inputs. The serial paths fix the
// accumulation order so identical inputs give bit-identical outputs; the
// parallel path splits work over output channels only and therefore keeps the
// same per-element order.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "syenet/error.hpp"

namespace sye {

struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

template <typename T>
class Tensor {
 public:
  using value_type = T;

  /// Empty placeholder; every other constructor requires all dims > 0.
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> data);

  /// A length-c vector stored as 1 x c x 1 x 1 (biases, BN statistics, QCU bias).
  static Tensor vector(std::size_t c, T fill = T{0});
  static Tensor vector(std::vector<T> values);

  const Shape& shape() const { return shape_; }
  std::size_t n() const { return shape_.n; }
  std::size_t c() const { return shape_.c; }
  std::size_t h() const { return shape_.h; }
  std::size_t w() const { return shape_.w; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[offset(n, c, h, w)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }
  /// Bounds-checked access.
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  /// Contiguous h*w plane of sample n, channel c.
  T* plane(std::size_t n, std::size_t c) { return data_.data() + offset(n, c, 0, 0); }
  const T* plane(std::size_t n, std::size_t c) const { return data_.data() + offset(n, c, 0, 0); }

  void fill(T v);
  Tensor reshaped(Shape s) const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

struct Padding {
  std::size_t h = 0;
  std::size_t w = 0;
  bool operator==(const Padding&) const = default;
};

/// Stride-1 convolution. weight is (c_out, c_in, k_h, k_w), bias is a c_out vector.
template <typename T>
struct Conv2dParams {
  Tensor<T> weight;
  Tensor<T> bias;
  Padding padding;

  std::size_t c_out() const { return weight.n(); }
  std::size_t c_in() const { return weight.c(); }
  std::size_t kh() const { return weight.h(); }
  std::size_t kw() const { return weight.w(); }
  std::size_t param_count() const { return weight.numel() + bias.numel(); }

  /// Throws ConfigError on even kernels, ShapeError on a bias of the wrong length.
  void validate() const;

  /// Zero-initialised conv with "same" padding.
  static Conv2dParams same(std::size_t c_out, std::size_t c_in, std::size_t kh, std::size_t kw);
};

template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T epsilon = T(1e-5);

  std::size_t channels() const { return gamma.c(); }
  void validate() const;
  /// gamma=1, beta=0, mean=0, var=1.
  static BatchNormParams identity(std::size_t c, T epsilon = T(1e-5));
};

enum class Exec { serial, parallel };

/// im2col + GEMM convolution (the fast path).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Conv2dParams<T>& params, Exec exec = Exec::serial);

/// Naive sliding-window convolution; accumulation order c_in, kernel row, kernel col.
template <typename T>
Tensor<T> conv2d_direct(const Tensor<T>& input, const Conv2dParams<T>& params);

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& input, const BatchNormParams<T>& params);

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r);
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t r);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// x[n,c,:,:] * s[c] for s of shape 1 x C x 1 x 1, or s[n,c] for s of shape N x C x 1 x 1.
template <typename T>
Tensor<T> channel_scale(const Tensor<T>& x, const Tensor<T>& s);
/// x[n,c,:,:] + b[c], b a C-vector.
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b);
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s);
/// Repeat each channel `times` times in place: out channel c*times + k = in channel c.
/// Followed by pixel_shuffle(r) with times = r*r this is nearest-neighbour upsampling.
template <typename T>
Tensor<T> repeat_channels(const Tensor<T>& x, std::size_t times);

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

namespace detail {

/// Column matrix of shape (c_in*kh*kw) x (h_out*w_out) for sample n; row order (c_in, kr, kc).
template <typename T>
void im2col(const Tensor<T>& input, std::size_t n, std::size_t kh, std::size_t kw, Padding pad,
            std::size_t h_out, std::size_t w_out, std::vector<T>& cols);

/// Scatter-add of a column matrix back into sample n of `grad_input`.
template <typename T>
void col2im(const std::vector<T>& cols, std::size_t n, std::size_t kh, std::size_t kw, Padding pad,
            std::size_t h_out, std::size_t w_out, Tensor<T>& grad_input);

Shape conv_output_shape(const Shape& in, std::size_t c_out, std::size_t kh, std::size_t kw,
                        Padding pad);

}  // namespace detail

}  // namespace sye
