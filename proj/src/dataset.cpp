// SPDX-License-Identifier: Apache-2.0
#include "syenet/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace sye {

void DatasetSpec::validate() const {
  if (patch < 16) throw ConfigError("patch must be at least 16");
  if (count == 0) throw ConfigError("dataset count must be positive");
  if (task == Task::sr) {
    if (scale < 2 || scale > 4) throw ConfigError("SR scale must be 2, 3 or 4");
    if (patch % scale != 0) throw ConfigError("patch must be divisible by the SR scale");
  }
  if (task == Task::isp && patch % 2 != 0) throw ConfigError("ISP patch must be even");
  if (isp_noise < 0.0) throw ConfigError("noise level must be non-negative");
  if (!(lle_gamma > 0.0) || !(lle_gain > 0.0)) throw ConfigError("darkening parameters must be positive");
}

template <typename T>
Tensor<T> synthetic_image(Rng& rng, std::size_t h, std::size_t w) {
  constexpr double kTau = 2.0 * std::numbers::pi;
  std::array<double, 3> base{}, gx{}, gy{};
  for (std::size_t c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.2, 0.8);
    gx[c] = rng.uniform(-0.3, 0.3);
    gy[c] = rng.uniform(-0.3, 0.3);
  }
  // low-frequency wave
  const double wf_x = rng.uniform(-1.5, 1.5);
  const double wf_y = rng.uniform(-1.5, 1.5);
  const double w_phase = rng.uniform(0.0, kTau);
  const double w_amp = rng.uniform(0.0, 0.15);

  struct Shape2 {
    bool disc;
    double px, py, nx, ny, r;
    std::array<double, 3> offset;
  };
  std::vector<Shape2> shapes(1 + rng.index(3));
  for (auto& s : shapes) {
    s.disc = rng.uniform() < 0.4;
    s.px = rng.uniform(0.1, 0.9);
    s.py = rng.uniform(0.1, 0.9);
    const double theta = rng.uniform(0.0, kTau);
    s.nx = std::cos(theta);
    s.ny = std::sin(theta);
    s.r = rng.uniform(0.1, 0.4);
    for (auto& o : s.offset) o = rng.uniform(-0.4, 0.4);
  }

  // stripe texture, period in pixels
  const double period = rng.uniform(3.0, 8.0);
  const double t_theta = rng.uniform(0.0, kTau);
  const double t_amp = rng.uniform(0.0, 0.12);
  const double t_phase = rng.uniform(0.0, kTau);
  const double tx = std::cos(t_theta) / period;
  const double ty = std::sin(t_theta) / period;

  Tensor<T> img(Shape{1, 3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
      const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
      const double wave = w_amp * std::sin(kTau * (wf_x * u + wf_y * v) + w_phase);
      const double stripe =
          t_amp * std::sin(kTau * (tx * static_cast<double>(x) + ty * static_cast<double>(y)) + t_phase);
      for (std::size_t c = 0; c < 3; ++c) {
        double val = base[c] + gx[c] * (u - 0.5) + gy[c] * (v - 0.5) + wave + stripe;
        for (const auto& s : shapes) {
          const double dx = u - s.px;
          const double dy = v - s.py;
          const bool inside = s.disc ? dx * dx + dy * dy < s.r * s.r : dx * s.nx + dy * s.ny > 0.0;
          if (inside) val += s.offset[c];
        }
        img(0, c, y, x) = static_cast<T>(val);
      }
    }
  }
  for (auto& v : img.data()) v = static_cast<T>(std::clamp(static_cast<double>(v) + 0.01 * rng.normal(), 0.0, 1.0));
  return img;
}

template <typename T>
Tensor<T> box_downsample(const Tensor<T>& x, std::size_t s) {
  if (s == 0 || x.h() % s != 0 || x.w() % s != 0) {
    throw ShapeError("box_downsample: " + to_string(x.shape()) + " not divisible by " + std::to_string(s));
  }
  Tensor<T> out(Shape{x.n(), x.c(), x.h() / s, x.w() / s});
  const double inv = 1.0 / static_cast<double>(s * s);
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c)
      for (std::size_t y = 0; y < out.h(); ++y)
        for (std::size_t xx = 0; xx < out.w(); ++xx) {
          double acc = 0.0;
          for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = 0; j < s; ++j) acc += static_cast<double>(x(n, c, y * s + i, xx * s + j));
          out(n, c, y, xx) = static_cast<T>(acc * inv);
        }
  return out;
}

namespace {

double keys(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::array<std::ptrdiff_t, 4> idx;
  std::array<double, 4> w;
};

std::vector<Taps> taps(std::size_t in, std::size_t out) {
  std::vector<Taps> t(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const double f = std::floor(src);
    for (int k = 0; k < 4; ++k) {
      const double pos = f - 1.0 + k;
      t[o].idx[k] = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(pos), 0,
                                               static_cast<std::ptrdiff_t>(in) - 1);
      t[o].w[k] = keys(src - pos);
    }
  }
  return t;
}

}  // namespace

template <typename T>
Tensor<T> resize_bicubic(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bicubic: empty output");
  const auto ty = taps(x.h(), out_h);
  const auto tx = taps(x.w(), out_w);
  Tensor<T> out(Shape{x.n(), x.c(), out_h, out_w});
  std::vector<double> rows(x.h() * out_w);
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      for (std::size_t y = 0; y < x.h(); ++y)
        for (std::size_t o = 0; o < out_w; ++o) {
          double acc = 0.0;
          for (int k = 0; k < 4; ++k) acc += tx[o].w[k] * static_cast<double>(x(n, c, y, tx[o].idx[k]));
          rows[y * out_w + o] = acc;
        }
      for (std::size_t o = 0; o < out_h; ++o)
        for (std::size_t xx = 0; xx < out_w; ++xx) {
          double acc = 0.0;
          for (int k = 0; k < 4; ++k) acc += ty[o].w[k] * rows[ty[o].idx[k] * out_w + xx];
          out(n, c, o, xx) = static_cast<T>(acc);
        }
    }
  }
  return out;
}

template <typename T>
Tensor<T> mosaic_rggb(const Tensor<T>& rgb) {
  if (rgb.c() != 3) throw ShapeError("mosaic_rggb: expected 3 channels");
  if (rgb.h() % 2 != 0 || rgb.w() % 2 != 0) throw ShapeError("mosaic_rggb: odd image size");
  Tensor<T> out(Shape{rgb.n(), 1, rgb.h(), rgb.w()});
  for (std::size_t n = 0; n < rgb.n(); ++n)
    for (std::size_t y = 0; y < rgb.h(); ++y)
      for (std::size_t x = 0; x < rgb.w(); ++x) {
        // R at (even, even), B at (odd, odd), G elsewhere
        const std::size_t c = (y % 2 == 0 && x % 2 == 0) ? 0 : (y % 2 == 1 && x % 2 == 1) ? 2 : 1;
        out(n, 0, y, x) = rgb(n, c, y, x);
      }
  return out;
}

template <typename T>
Tensor<T> darken(const Tensor<T>& rgb, double gamma, double gain) {
  Tensor<T> out(rgb.shape());
  for (std::size_t i = 0; i < rgb.numel(); ++i) {
    out[i] = static_cast<T>(gain * std::pow(std::max(0.0, static_cast<double>(rgb[i])), gamma));
  }
  return out;
}

template <typename T>
Dataset<T> make_synthetic_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset<T> ds;
  ds.spec = spec;
  Rng rng(spec.seed);
  ds.samples.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Sample<T> s;
    s.target = synthetic_image<T>(rng, spec.patch, spec.patch);
    switch (spec.task) {
      case Task::sr:
        s.input = box_downsample(s.target, spec.scale);
        break;
      case Task::lle:
        s.input = darken(s.target, spec.lle_gamma, spec.lle_gain);
        break;
      case Task::isp:
        s.input = mosaic_rggb(s.target);
        if (spec.isp_noise > 0.0) {
          for (auto& v : s.input.data()) v = static_cast<T>(static_cast<double>(v) + spec.isp_noise * rng.normal());
        }
        break;
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

template <typename T>
Tensor<T> augment(const Tensor<T>& x, Augment a) {
  if (a == Augment::identity) return x;
  const bool rot = a == Augment::rot90 || a == Augment::rot270;
  if (rot && x.h() != x.w()) throw ShapeError("augment: rotation needs square planes");
  Tensor<T> out(x.shape());
  const std::size_t H = x.h();
  const std::size_t W = x.w();
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) {
          std::size_t sy = y, sx = xx;
          switch (a) {
            case Augment::identity: break;
            case Augment::hflip: sx = W - 1 - xx; break;
            case Augment::vflip: sy = H - 1 - y; break;
            case Augment::rot90: sy = xx; sx = W - 1 - y; break;
            case Augment::rot180: sy = H - 1 - y; sx = W - 1 - xx; break;
            case Augment::rot270: sy = H - 1 - xx; sx = y; break;
          }
          out(n, c, y, xx) = x(n, c, sy, sx);
        }
  return out;
}

template <typename T>
Sample<T> augment_sample(const Sample<T>& s, Augment a, Task task) {
  if (a == Augment::identity) return s;
  Sample<T> out;
  out.target = augment(s.target, a);
  if (task != Task::isp) {
    out.input = augment(s.input, a);
    return out;
  }
  const Tensor<T> clean = mosaic_rggb(s.target);
  Tensor<T> noise(s.input.shape());
  for (std::size_t i = 0; i < noise.numel(); ++i) noise[i] = s.input[i] - clean[i];
  out.input = add(mosaic_rggb(out.target), augment(noise, a));
  return out;
}

template <typename T>
Tensor<T> stack(const std::vector<const Tensor<T>*>& parts) {
  if (parts.empty()) throw ShapeError("stack: nothing to stack");
  const Shape s0 = parts.front()->shape();
  std::size_t n = 0;
  for (const auto* p : parts) {
    if (p->c() != s0.c || p->h() != s0.h || p->w() != s0.w) throw ShapeError("stack: shape mismatch");
    n += p->n();
  }
  Tensor<T> out(Shape{n, s0.c, s0.h, s0.w});
  std::size_t at = 0;
  for (const auto* p : parts) {
    std::copy(p->data().begin(), p->data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(at));
    at += p->numel();
  }
  return out;
}

#define SYE_INSTANTIATE(T)                                                      \
  template Tensor<T> synthetic_image(Rng&, std::size_t, std::size_t);           \
  template Dataset<T> make_synthetic_dataset(const DatasetSpec&);               \
  template Tensor<T> box_downsample(const Tensor<T>&, std::size_t);             \
  template Tensor<T> resize_bicubic(const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> mosaic_rggb(const Tensor<T>&);                             \
  template Tensor<T> darken(const Tensor<T>&, double, double);                  \
  template Tensor<T> augment(const Tensor<T>&, Augment);                        \
  template Sample<T> augment_sample(const Sample<T>&, Augment, Task);           \
  template Tensor<T> stack(const std::vector<const Tensor<T>*>&);

SYE_INSTANTIATE(float)
SYE_INSTANTIATE(double)

#undef SYE_INSTANTIATE

}  // namespace sye
