// SPDX-License-Identifier: Apache-2.0
#include "syenet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sye {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s.n << "x" << s.c << "x" << s.h << "x" << s.w;
  return os.str();
}

namespace {

void require_positive(const Shape& s) {
  if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("tensor dims must be positive, got " + to_string(s));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <typename T>
void require_channel_vector(const Tensor<T>& v, std::size_t c, const char* what) {
  if (v.numel() != c) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(c) + " values, got " +
                     std::to_string(v.numel()));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape) {
  require_positive(shape);
  data_.assign(shape.numel(), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  require_positive(shape);
  if (data_.size() != shape.numel()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape));
  }
}

template <typename T>
Tensor<T> Tensor<T>::vector(std::size_t c, T fill) {
  return Tensor(Shape{1, c, 1, 1}, fill);
}

template <typename T>
Tensor<T> Tensor<T>::vector(std::vector<T> values) {
  const std::size_t c = values.size();
  return Tensor(Shape{1, c, 1, 1}, std::move(values));
}

template <typename T>
T& Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  if (n >= shape_.n || c >= shape_.c || h >= shape_.h || w >= shape_.w) {
    throw ShapeError("index out of range for " + to_string(shape_));
  }
  return (*this)(n, c, h, w);
}

template <typename T>
const T& Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  return const_cast<Tensor&>(*this).at(n, c, h, w);
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape s) const {
  return Tensor(s, data_);
}

template <typename T>
void Conv2dParams<T>::validate() const {
  if (weight.empty()) throw ShapeError("conv2d: empty weight");
  if (kh() % 2 == 0 || kw() % 2 == 0) {
    throw ConfigError("conv2d: kernel sizes must be odd, got " + std::to_string(kh()) + "x" +
                      std::to_string(kw()));
  }
  require_channel_vector(bias, c_out(), "conv2d bias");
}

template <typename T>
Conv2dParams<T> Conv2dParams<T>::same(std::size_t c_out, std::size_t c_in, std::size_t kh,
                                      std::size_t kw) {
  Conv2dParams p{Tensor<T>(Shape{c_out, c_in, kh, kw}), Tensor<T>::vector(c_out),
                 Padding{(kh - 1) / 2, (kw - 1) / 2}};
  p.validate();
  return p;
}

template <typename T>
void BatchNormParams<T>::validate() const {
  const std::size_t c = gamma.numel();
  require_channel_vector(beta, c, "batchnorm beta");
  require_channel_vector(running_mean, c, "batchnorm running_mean");
  require_channel_vector(running_var, c, "batchnorm running_var");
  if (!(epsilon >= T(0))) throw ConfigError("batchnorm: epsilon must be non-negative");
  for (T v : running_var.data()) {
    if (v < T(0)) throw ConfigError("batchnorm: negative running variance");
    if (v + epsilon <= T(0)) throw ConfigError("batchnorm: zero variance needs a positive epsilon");
  }
}

template <typename T>
BatchNormParams<T> BatchNormParams<T>::identity(std::size_t c, T epsilon) {
  return {Tensor<T>::vector(c, T(1)), Tensor<T>::vector(c, T(0)), Tensor<T>::vector(c, T(0)),
          Tensor<T>::vector(c, T(1)), epsilon};
}

namespace detail {

Shape conv_output_shape(const Shape& in, std::size_t c_out, std::size_t kh, std::size_t kw,
                        Padding pad) {
  const std::size_t ph = in.h + 2 * pad.h;
  const std::size_t pw = in.w + 2 * pad.w;
  if (ph < kh || pw < kw) {
    throw ShapeError("conv2d: kernel larger than padded input " + to_string(in));
  }
  return Shape{in.n, c_out, ph - kh + 1, pw - kw + 1};
}

template <typename T>
void im2col(const Tensor<T>& input, std::size_t n, std::size_t kh, std::size_t kw, Padding pad,
            std::size_t h_out, std::size_t w_out, std::vector<T>& cols) {
  const std::size_t c_in = input.c();
  const std::size_t H = input.h();
  const std::size_t W = input.w();
  const std::size_t hw = h_out * w_out;
  cols.assign(c_in * kh * kw * hw, T(0));
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < c_in; ++ci) {
    const T* src = input.plane(n, ci);
    for (std::size_t kr = 0; kr < kh; ++kr) {
      for (std::size_t kc = 0; kc < kw; ++kc, ++row) {
        T* dst = cols.data() + row * hw;
        for (std::size_t oy = 0; oy < h_out; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + kr) -
                                    static_cast<std::ptrdiff_t>(pad.h);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          const T* srow = src + static_cast<std::size_t>(iy) * W;
          T* drow = dst + oy * w_out;
          for (std::size_t ox = 0; ox < w_out; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kc) -
                                      static_cast<std::ptrdiff_t>(pad.w);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(W)) drow[ox] = srow[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const std::vector<T>& cols, std::size_t n, std::size_t kh, std::size_t kw, Padding pad,
            std::size_t h_out, std::size_t w_out, Tensor<T>& grad_input) {
  const std::size_t c_in = grad_input.c();
  const std::size_t H = grad_input.h();
  const std::size_t W = grad_input.w();
  const std::size_t hw = h_out * w_out;
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < c_in; ++ci) {
    T* dst = grad_input.plane(n, ci);
    for (std::size_t kr = 0; kr < kh; ++kr) {
      for (std::size_t kc = 0; kc < kw; ++kc, ++row) {
        const T* src = cols.data() + row * hw;
        for (std::size_t oy = 0; oy < h_out; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + kr) -
                                    static_cast<std::ptrdiff_t>(pad.h);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          T* drow = dst + static_cast<std::size_t>(iy) * W;
          const T* srow = src + oy * w_out;
          for (std::size_t ox = 0; ox < w_out; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kc) -
                                      static_cast<std::ptrdiff_t>(pad.w);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(W)) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

namespace {

template <typename T>
Shape checked_conv_shape(const Tensor<T>& input, const Conv2dParams<T>& params) {
  params.validate();
  if (input.c() != params.c_in()) {
    throw ShapeError("conv2d: input has " + std::to_string(input.c()) + " channels, kernel expects " +
                     std::to_string(params.c_in()));
  }
  return detail::conv_output_shape(input.shape(), params.c_out(), params.kh(), params.kw(),
                                   params.padding);
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Conv2dParams<T>& params, Exec exec) {
  const Shape os = checked_conv_shape(input, params);
  Tensor<T> out(os);
  const std::size_t hw = os.h * os.w;
  const std::size_t k = params.c_in() * params.kh() * params.kw();
  const std::size_t c_out = params.c_out();
  const T* wt = params.weight.data().data();
  std::vector<T> cols;
  for (std::size_t n = 0; n < os.n; ++n) {
    detail::im2col(input, n, params.kh(), params.kw(), params.padding, os.h, os.w, cols);
    // Each output element accumulates over k in ascending (c_in, kr, kc) order,
    // matching conv2d_direct; rows are independent so splitting over o is exact.
    const long long c_out_ll = static_cast<long long>(c_out);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long long oi = 0; oi < c_out_ll; ++oi) {
      const std::size_t o = static_cast<std::size_t>(oi);
      T* dst = out.plane(n, o);
      const T* wrow = wt + o * k;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T wv = wrow[kk];
        const T* src = cols.data() + kk * hw;
        for (std::size_t p = 0; p < hw; ++p) dst[p] += wv * src[p];
      }
      const T b = params.bias[o];
      for (std::size_t p = 0; p < hw; ++p) dst[p] += b;
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_direct(const Tensor<T>& input, const Conv2dParams<T>& params) {
  const Shape os = checked_conv_shape(input, params);
  Tensor<T> out(os);
  const auto H = static_cast<std::ptrdiff_t>(input.h());
  const auto W = static_cast<std::ptrdiff_t>(input.w());
  for (std::size_t n = 0; n < os.n; ++n) {
    for (std::size_t o = 0; o < os.c; ++o) {
      for (std::size_t y = 0; y < os.h; ++y) {
        for (std::size_t x = 0; x < os.w; ++x) {
          T acc = T(0);
          for (std::size_t ci = 0; ci < params.c_in(); ++ci) {
            for (std::size_t kr = 0; kr < params.kh(); ++kr) {
              const auto iy = static_cast<std::ptrdiff_t>(y + kr) -
                              static_cast<std::ptrdiff_t>(params.padding.h);
              if (iy < 0 || iy >= H) continue;
              for (std::size_t kc = 0; kc < params.kw(); ++kc) {
                const auto ix = static_cast<std::ptrdiff_t>(x + kc) -
                                static_cast<std::ptrdiff_t>(params.padding.w);
                if (ix < 0 || ix >= W) continue;
                acc += params.weight(o, ci, kr, kc) *
                       input(n, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
            }
          }
          out(n, o, y, x) = acc + params.bias[o];
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& input, const BatchNormParams<T>& params) {
  params.validate();
  if (params.channels() != input.c()) {
    throw ShapeError("batchnorm: expected " + std::to_string(params.channels()) +
                     " channels, input has " + std::to_string(input.c()));
  }
  Tensor<T> out(input.shape());
  const std::size_t hw = input.h() * input.w();
  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t c = 0; c < input.c(); ++c) {
      const T inv_std = T(1) / std::sqrt(params.running_var[c] + params.epsilon);
      const T mean = params.running_mean[c];
      const T g = params.gamma[c];
      const T b = params.beta[c];
      const T* src = input.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::size_t p = 0; p < hw; ++p) dst[p] = (src[p] - mean) * inv_std * g + b;
    }
  }
  return out;
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r) {
  if (r == 0) throw ConfigError("pixel_shuffle: factor must be positive");
  const std::size_t rr = r * r;
  if (input.c() % rr != 0) {
    throw ShapeError("pixel_shuffle: channels " + std::to_string(input.c()) +
                     " not divisible by " + std::to_string(rr));
  }
  const std::size_t c_out = input.c() / rr;
  Tensor<T> out(Shape{input.n(), c_out, input.h() * r, input.w() * r});
  for (std::size_t n = 0; n < input.n(); ++n)
    for (std::size_t c = 0; c < c_out; ++c)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j)
          for (std::size_t y = 0; y < input.h(); ++y)
            for (std::size_t x = 0; x < input.w(); ++x)
              out(n, c, y * r + i, x * r + j) = input(n, c * rr + i * r + j, y, x);
  return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t r) {
  if (r == 0) throw ConfigError("pixel_unshuffle: factor must be positive");
  if (input.h() % r != 0 || input.w() % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial dims " + to_string(input.shape()) +
                     " not divisible by " + std::to_string(r));
  }
  const std::size_t rr = r * r;
  const std::size_t h = input.h() / r;
  const std::size_t w = input.w() / r;
  Tensor<T> out(Shape{input.n(), input.c() * rr, h, w});
  for (std::size_t n = 0; n < input.n(); ++n)
    for (std::size_t c = 0; c < input.c(); ++c)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j)
          for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
              out(n, c * rr + i * r + j, y, x) = input(n, c, y * r + i, x * r + j);
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
Tensor<T> channel_scale(const Tensor<T>& x, const Tensor<T>& s) {
  const bool per_sample = s.n() == x.n() && s.c() == x.c() && s.h() == 1 && s.w() == 1;
  const bool shared = s.numel() == x.c();
  if (!per_sample && !shared) {
    throw ShapeError("channel_scale: scale " + to_string(s.shape()) + " does not match " +
                     to_string(x.shape()));
  }
  Tensor<T> out(x.shape());
  const std::size_t hw = x.h() * x.w();
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T f = per_sample ? s(n, c, 0, 0) : s[c];
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p] * f;
    }
  }
  return out;
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b) {
  require_channel_vector(b, x.c(), "add_channel_bias");
  Tensor<T> out(x.shape());
  const std::size_t hw = x.h() * x.w();
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p] + b[c];
    }
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape first = parts.front().shape();
  std::size_t c_total = 0;
  for (const auto& p : parts) {
    if (p.n() != first.n || p.h() != first.h || p.w() != first.w) {
      throw ShapeError("concat_channels: " + to_string(p.shape()) + " incompatible with " +
                       to_string(first));
    }
    c_total += p.c();
  }
  Tensor<T> out(Shape{first.n, c_total, first.h, first.w});
  const std::size_t hw = first.h * first.w;
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t c0 = 0;
    for (const auto& p : parts) {
      std::copy_n(p.plane(n, 0), p.c() * hw, out.plane(n, c0));
      c0 += p.c();
    }
  }
  return out;
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
  require_channel_vector(slope, x.c(), "prelu slope");
  Tensor<T> out(x.shape());
  const std::size_t hw = x.h() * x.w();
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T a = slope[c];
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p] > T(0) ? src[p] : a * src[p];
    }
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  Tensor<T> out(Shape{x.n(), x.c(), 1, 1});
  const std::size_t hw = x.h() * x.w();
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T* src = x.plane(n, c);
      T acc = T(0);
      for (std::size_t p = 0; p < hw; ++p) acc += src[p];
      out(n, c, 0, 0) = acc / static_cast<T>(hw);
    }
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * s;
  return out;
}

template <typename T>
Tensor<T> repeat_channels(const Tensor<T>& x, std::size_t times) {
  if (times == 0) throw ConfigError("repeat_channels: times must be positive");
  Tensor<T> out(Shape{x.n(), x.c() * times, x.h(), x.w()});
  const std::size_t hw = x.h() * x.w();
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c)
      for (std::size_t k = 0; k < times; ++k)
        std::copy_n(x.plane(n, c), hw, out.plane(n, c * times + k));
  return out;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  T m = T(0);
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

#define SYE_INSTANTIATE(T)                                                                      \
  template class Tensor<T>;                                                                     \
  template struct Conv2dParams<T>;                                                              \
  template struct BatchNormParams<T>;                                                           \
  template Tensor<T> conv2d(const Tensor<T>&, const Conv2dParams<T>&, Exec);                    \
  template Tensor<T> conv2d_direct(const Tensor<T>&, const Conv2dParams<T>&);                   \
  template Tensor<T> batchnorm_infer(const Tensor<T>&, const BatchNormParams<T>&);              \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, std::size_t);                              \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, std::size_t);                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> channel_scale(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                               \
  template Tensor<T> prelu(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                 \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                         \
  template Tensor<T> scale(const Tensor<T>&, T);                                                \
  template Tensor<T> repeat_channels(const Tensor<T>&, std::size_t);                            \
  template T max_abs_diff(const Tensor<T>&, const Tensor<T>&);                                  \
  template void detail::im2col(const Tensor<T>&, std::size_t, std::size_t, std::size_t, Padding, \
                               std::size_t, std::size_t, std::vector<T>&);                      \
  template void detail::col2im(const std::vector<T>&, std::size_t, std::size_t, std::size_t,     \
                               Padding, std::size_t, std::size_t, Tensor<T>&);

SYE_INSTANTIATE(float)
SYE_INSTANTIATE(double)

#undef SYE_INSTANTIATE

}  // namespace sye
