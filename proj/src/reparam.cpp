// SPDX-License-Identifier: Apache-2.0
#include "syenet/reparam.hpp"

#include <algorithm>
#include <cmath>

namespace sye {

template <typename T>
void ConvRepBlock<T>::validate() const {
  if (branches.empty()) throw ConfigError("ConvRep block has no branches");
  if (nominal_kernel % 2 == 0) throw ConfigError("ConvRep nominal kernel must be odd");
  const std::size_t cin = branches.front().conv.c_in();
  const std::size_t cb = branches.front().conv.c_out();
  for (const auto& b : branches) {
    b.conv.validate();
    if (b.conv.c_in() != cin || b.conv.c_out() != cb) {
      throw ShapeError("ConvRep branches must share input and output channel counts");
    }
    if (b.conv.kh() > nominal_kernel || b.conv.kw() > nominal_kernel) {
      throw ConfigError("ConvRep branch kernel exceeds nominal kernel " +
                        std::to_string(nominal_kernel));
    }
    if (b.conv.padding != Padding{(b.conv.kh() - 1) / 2, (b.conv.kw() - 1) / 2}) {
      throw ConfigError("ConvRep branches must use same padding");
    }
    if (b.bn) {
      b.bn->validate();
      if (b.bn->channels() != cb) throw ShapeError("ConvRep branch batch norm length mismatch");
    }
  }
  pointwise.validate();
  if (pointwise.kh() != 1 || pointwise.kw() != 1 || pointwise.padding != Padding{}) {
    throw ConfigError("ConvRep pointwise conv must be 1x1 without padding");
  }
  if (pointwise.c_in() != branches.size() * cb) {
    throw ShapeError("ConvRep pointwise expects " + std::to_string(pointwise.c_in()) +
                     " channels, branches produce " + std::to_string(branches.size() * cb));
  }
}

template <typename T>
Tensor<T> ConvRepBlock<T>::forward(const Tensor<T>& x) const {
  std::vector<Tensor<T>> outs;
  outs.reserve(branches.size());
  for (const auto& b : branches) {
    Tensor<T> y = conv2d(x, b.conv);
    if (b.bn) y = batchnorm_infer(y, *b.bn);
    outs.push_back(std::move(y));
  }
  return conv2d(concat_channels<T>(outs), pointwise);
}

template <typename T>
std::size_t ConvRepBlock<T>::param_count() const {
  std::size_t total = pointwise.param_count();
  for (const auto& b : branches) {
    total += b.conv.param_count();
    if (b.bn) total += b.bn->gamma.numel() + b.bn->beta.numel();
  }
  return total;
}

template <typename T>
ConvRepBlock<T> make_block(const BlockLayout& layout, Rng& rng) {
  if (layout.menu.empty()) throw ConfigError("branch menu is empty");
  if (layout.expansion == 0) throw ConfigError("expansion ratio must be positive");
  const std::size_t cb = layout.expansion * layout.c_out;
  ConvRepBlock<T> block;
  block.nominal_kernel = layout.nominal_kernel;
  for (const auto& choice : layout.menu) {
    const std::size_t k = choice.resolve(layout.nominal_kernel);
    BranchSpec<T> b{Conv2dParams<T>::same(cb, layout.c_in, k, k), std::nullopt};
    const double bound = std::sqrt(3.0 / static_cast<double>(layout.c_in * k * k));
    rng.fill_uniform(b.conv.weight, -bound, bound);
    if (choice.with_bn) b.bn = BatchNormParams<T>::identity(cb);
    block.branches.push_back(std::move(b));
  }
  const std::size_t mix_in = layout.menu.size() * cb;
  block.pointwise = Conv2dParams<T>::same(layout.c_out, mix_in, 1, 1);
  const double bound = std::sqrt(3.0 / static_cast<double>(mix_in));
  rng.fill_uniform(block.pointwise.weight, -bound, bound);
  block.validate();
  return block;
}

template <typename T>
void randomize_bn(ConvRepBlock<T>& block, Rng& rng) {
  for (auto& b : block.branches) {
    if (!b.bn) continue;
    rng.fill_uniform(b.bn->gamma, 0.5, 1.5);
    rng.fill_uniform(b.bn->beta, -0.5, 0.5);
    rng.fill_uniform(b.bn->running_mean, -0.5, 0.5);
    rng.fill_uniform(b.bn->running_var, 0.25, 2.0);
  }
}

template <typename T>
Conv2dParams<T> fold_bn(const Conv2dParams<T>& conv, const BatchNormParams<T>& bn) {
  conv.validate();
  bn.validate();
  if (bn.channels() != conv.c_out()) {
    throw ShapeError("fold_bn: batch norm has " + std::to_string(bn.channels()) +
                     " channels, conv produces " + std::to_string(conv.c_out()));
  }
  Conv2dParams<T> out = conv;
  const std::size_t per_out = conv.c_in() * conv.kh() * conv.kw();
  for (std::size_t o = 0; o < conv.c_out(); ++o) {
    const T w_bn = T(1) / std::sqrt(bn.running_var[o] + bn.epsilon);
    const T b_bn = -bn.running_mean[o] * w_bn;
    const T g = bn.gamma[o];
    T* wrow = out.weight.data().data() + o * per_out;
    for (std::size_t i = 0; i < per_out; ++i) wrow[i] = g * w_bn * wrow[i];
    out.bias[o] = g * (w_bn * conv.bias[o] + b_bn) + bn.beta[o];
  }
  return out;
}

template <typename T>
Conv2dParams<T> pad_kernel(const Conv2dParams<T>& conv, std::size_t target) {
  conv.validate();
  if (target % 2 == 0) throw ConfigError("pad_kernel: target size must be odd");
  if (conv.kh() > target || conv.kw() > target) {
    throw ConfigError("pad_kernel: kernel " + std::to_string(conv.kh()) + "x" +
                      std::to_string(conv.kw()) + " larger than target " + std::to_string(target));
  }
  if (conv.kh() == target && conv.kw() == target) return conv;
  const std::size_t dh = (target - conv.kh()) / 2;
  const std::size_t dw = (target - conv.kw()) / 2;
  Conv2dParams<T> out{Tensor<T>(Shape{conv.c_out(), conv.c_in(), target, target}), conv.bias,
                      Padding{conv.padding.h + dh, conv.padding.w + dw}};
  for (std::size_t o = 0; o < conv.c_out(); ++o)
    for (std::size_t i = 0; i < conv.c_in(); ++i)
      for (std::size_t r = 0; r < conv.kh(); ++r)
        for (std::size_t c = 0; c < conv.kw(); ++c)
          out.weight(o, i, r + dh, c + dw) = conv.weight(o, i, r, c);
  return out;
}

template <typename T>
Conv2dParams<T> fold_concat(const std::vector<Conv2dParams<T>>& branches) {
  if (branches.empty()) throw ShapeError("fold_concat: no branches");
  const auto& first = branches.front();
  first.validate();
  std::size_t c_total = 0;
  for (const auto& b : branches) {
    b.validate();
    if (b.c_in() != first.c_in()) throw ShapeError("fold_concat: branches differ in c_in");
    if (b.kh() != first.kh() || b.kw() != first.kw() || b.padding != first.padding) {
      throw ConfigError("fold_concat: branches differ in kernel size; pad them first");
    }
    c_total += b.c_out();
  }
  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;
  for (const auto& b : branches) {
    // Concatenate along the c_out axis by viewing each weight as 1 x c_out x (c_in*kh) x kw.
    weights.push_back(b.weight.reshaped(Shape{1, b.c_out(), b.c_in() * b.kh(), b.kw()}));
    biases.push_back(b.bias);
  }
  Tensor<T> w = concat_channels<T>(weights);
  return Conv2dParams<T>{w.reshaped(Shape{c_total, first.c_in(), first.kh(), first.kw()}),
                         concat_channels<T>(biases), first.padding};
}

template <typename T>
Conv2dParams<T> fold_pointwise(const Conv2dParams<T>& cat, const Conv2dParams<T>& pointwise) {
  cat.validate();
  pointwise.validate();
  if (pointwise.kh() != 1 || pointwise.kw() != 1 || pointwise.padding != Padding{}) {
    throw ConfigError("fold_pointwise: second conv must be 1x1 without padding");
  }
  if (pointwise.c_in() != cat.c_out()) {
    throw ShapeError("fold_pointwise: 1x1 conv expects " + std::to_string(pointwise.c_in()) +
                     " channels, first conv produces " + std::to_string(cat.c_out()));
  }
  const std::size_t mid = cat.c_out();
  const std::size_t per_out = cat.c_in() * cat.kh() * cat.kw();
  Conv2dParams<T> out{Tensor<T>(Shape{pointwise.c_out(), cat.c_in(), cat.kh(), cat.kw()}),
                      Tensor<T>::vector(pointwise.c_out()), cat.padding};
  const T* cw = cat.weight.data().data();
  for (std::size_t o = 0; o < pointwise.c_out(); ++o) {
    T* dst = out.weight.data().data() + o * per_out;
    T bias_acc = T(0);
    for (std::size_t m = 0; m < mid; ++m) {
      const T p = pointwise.weight(o, m, 0, 0);
      const T* src = cw + m * per_out;
      for (std::size_t i = 0; i < per_out; ++i) dst[i] += p * src[i];
      bias_acc += p * cat.bias[m];
    }
    out.bias[o] = bias_acc + pointwise.bias[o];
  }
  return out;
}

template <typename T>
FoldedConv<T> reparameterize(const ConvRepBlock<T>& block) {
  block.validate();
  std::vector<Conv2dParams<T>> convs;
  convs.reserve(block.branches.size());
  for (const auto& b : block.branches) {
    Conv2dParams<T> c = b.bn ? fold_bn(b.conv, *b.bn) : b.conv;
    convs.push_back(pad_kernel(c, block.nominal_kernel));
  }
  return FoldedConv<T>{fold_pointwise(fold_concat(convs), block.pointwise)};
}

template <typename T>
EquivalenceReport verify_equivalence(const ConvRepBlock<T>& block, const FoldedConv<T>& folded,
                                     std::size_t trials, double tolerance, std::uint64_t seed) {
  block.validate();
  folded.conv.validate();
  if (folded.conv.c_in() != block.c_in() || folded.conv.c_out() != block.c_out()) {
    throw ShapeError("verify_equivalence: folded conv channels do not match the block");
  }
  if (trials == 0) throw ConfigError("verify_equivalence: need at least one trial");
  Rng rng(seed);
  const std::size_t side = std::max<std::size_t>(8, block.nominal_kernel + 3);
  EquivalenceReport report{0.0, tolerance, trials, false};
  for (std::size_t t = 0; t < trials; ++t) {
    Tensor<T> x(Shape{1, block.c_in(), side, side});
    bool nonzero = false;
    while (!nonzero) {
      rng.fill_uniform(x, -1.0, 1.0);
      nonzero = std::any_of(x.data().begin(), x.data().end(), [](T v) { return v != T(0); });
    }
    const Tensor<T> a = block.forward(x);
    const Tensor<T> b = folded.forward(x);
    if (a.shape() != b.shape()) throw ShapeError("verify_equivalence: output shapes differ");
    report.max_abs_diff = std::max(report.max_abs_diff, static_cast<double>(max_abs_diff(a, b)));
  }
  report.pass = report.max_abs_diff <= tolerance;
  return report;
}

#define SYE_INSTANTIATE(T)                                                                     \
  template struct ConvRepBlock<T>;                                                             \
  template ConvRepBlock<T> make_block<T>(const BlockLayout&, Rng&);                            \
  template void randomize_bn(ConvRepBlock<T>&, Rng&);                                          \
  template Conv2dParams<T> fold_bn(const Conv2dParams<T>&, const BatchNormParams<T>&);         \
  template Conv2dParams<T> pad_kernel(const Conv2dParams<T>&, std::size_t);                    \
  template Conv2dParams<T> fold_concat(const std::vector<Conv2dParams<T>>&);                   \
  template Conv2dParams<T> fold_pointwise(const Conv2dParams<T>&, const Conv2dParams<T>&);     \
  template FoldedConv<T> reparameterize(const ConvRepBlock<T>&);                               \
  template EquivalenceReport verify_equivalence(const ConvRepBlock<T>&, const FoldedConv<T>&, \
                                                std::size_t, double, std::uint64_t);

SYE_INSTANTIATE(float)
SYE_INSTANTIATE(double)

#undef SYE_INSTANTIATE

}  // namespace sye
