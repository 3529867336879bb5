// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "syenet/rng.hpp"
#include "syenet/tensor.hpp"

using namespace sye;

namespace {

Conv2dParams<double> random_conv(Rng& rng, std::size_t co, std::size_t ci, std::size_t kh, std::size_t kw) {
  auto p = Conv2dParams<double>::same(co, ci, kh, kw);
  rng.fill_uniform(p.weight, -1, 1);
  rng.fill_uniform(p.bias, -1, 1);
  return p;
}

}  // namespace

TEST(Tensor, OffsetIsRowMajorNchw) {
  Tensor<float> t(Shape{2, 3, 4, 5});
  EXPECT_EQ(t.offset(1, 2, 3, 4), ((1 * 3 + 2) * 4 + 3) * 5 + 4);
  EXPECT_EQ(t.numel(), 120u);
  EXPECT_THROW(Tensor<float>(Shape{0, 1, 1, 1}), ShapeError);
  EXPECT_THROW(t.at(2, 0, 0, 0), ShapeError);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  Tensor<double> x(Shape{1, 1, 3, 3});
  rng.fill_uniform(x, -1, 1);
  auto p = Conv2dParams<double>::same(1, 1, 3, 3);
  p.weight(0, 0, 1, 1) = 1.0;
  EXPECT_EQ(conv2d(x, p), x);
}

TEST(Conv2d, AllOnesHandOracle) {
  Tensor<double> x(Shape{1, 1, 3, 3}, 1.0);
  auto p = Conv2dParams<double>::same(1, 1, 3, 3);
  p.weight.fill(1.0);
  const auto y = conv2d(x, p);
  const double want[9] = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y[i], want[i]);
}

TEST(Conv2d, ZeroKernelGivesBias) {
  Rng rng(2);
  Tensor<double> x(Shape{2, 3, 5, 4});
  rng.fill_uniform(x, -1, 1);
  auto p = Conv2dParams<double>::same(2, 3, 3, 3);
  p.bias = Tensor<double>::vector(std::vector<double>{0.5, -2.0});
  const auto y = conv2d(x, p);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t h = 0; h < 5; ++h)
      for (std::size_t w = 0; w < 4; ++w) {
        EXPECT_EQ(y(n, 0, h, w), 0.5);
        EXPECT_EQ(y(n, 1, h, w), -2.0);
      }
}

TEST(Conv2d, MatchesSlidingWindowOracle) {
  Rng rng(3);
  for (auto [kh, kw] : {std::pair{1, 1}, {3, 3}, {5, 5}, {3, 5}, {5, 1}}) {
    Tensor<double> x(Shape{2, 3, 7, 6});
    rng.fill_uniform(x, -1, 1);
    const auto p = random_conv(rng, 4, 3, kh, kw);
    const auto want = oracle::conv(x, p.weight, p.bias, static_cast<long>(p.padding.h), static_cast<long>(p.padding.w));
    EXPECT_LE(max_abs_diff(conv2d(x, p), want), 1e-12);
    EXPECT_LE(max_abs_diff(conv2d_direct(x, p), want), 1e-12);
  }
}

TEST(Conv2d, ValidPaddingOracle) {
  Rng rng(4);
  Tensor<double> x(Shape{1, 2, 8, 9});
  rng.fill_uniform(x, -1, 1);
  auto p = random_conv(rng, 3, 2, 3, 5);
  p.padding = {0, 1};
  const auto y = conv2d(x, p);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 6, 7}));
  EXPECT_LE(max_abs_diff(y, oracle::conv(x, p.weight, p.bias, 0, 1)), 1e-12);
}

TEST(Conv2d, FastPathBitIdenticalToDirect) {
  Rng rng(5);
  Tensor<float> x(Shape{2, 8, 11, 13});
  rng.fill_uniform(x, -1, 1);
  auto p = Conv2dParams<float>::same(6, 8, 5, 5);
  rng.fill_uniform(p.weight, -1, 1);
  rng.fill_uniform(p.bias, -1, 1);
  EXPECT_EQ(conv2d(x, p), conv2d_direct(x, p));
  EXPECT_EQ(conv2d(x, p), conv2d(x, p));
}

TEST(Conv2d, ParallelAgreesWithSerial) {
  Rng rng(6);
  Tensor<float> x(Shape{1, 8, 16, 16});
  rng.fill_uniform(x, -1, 1);
  auto p = Conv2dParams<float>::same(16, 8, 3, 3);
  rng.fill_uniform(p.weight, -1, 1);
  const auto s = conv2d(x, p, Exec::serial);
  const auto q = conv2d(x, p, Exec::parallel);
  for (std::size_t i = 0; i < s.numel(); ++i) EXPECT_LE(std::abs(s[i] - q[i]), 1e-5f * std::max(1.0f, std::abs(s[i])));
}

TEST(Conv2d, Linearity) {
  Rng rng(7);
  Tensor<double> x(Shape{1, 3, 6, 6}), y(Shape{1, 3, 6, 6});
  rng.fill_uniform(x, -1, 1);
  rng.fill_uniform(y, -1, 1);
  const auto p = random_conv(rng, 2, 3, 3, 3);
  const double a = 0.7, b = -1.3;
  Tensor<double> mix(x.shape());
  for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = a * x[i] + b * y[i];
  const auto lhs = conv2d(mix, p);
  const auto cx = conv2d(x, p), cy = conv2d(y, p);
  for (std::size_t n = 0; n < lhs.numel(); ++n) {
    const std::size_t c = (n / 36) % 2;
    const double rhs = a * cx[n] + b * cy[n] - (a + b - 1.0) * p.bias[c];
    EXPECT_LE(std::abs(lhs[n] - rhs), 1e-6 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(Conv2d, Errors) {
  Tensor<float> x(Shape{1, 3, 5, 5});
  EXPECT_THROW(conv2d(x, Conv2dParams<float>::same(2, 4, 3, 3)), ShapeError);
  auto even = Conv2dParams<float>::same(2, 3, 3, 3);
  even.weight = Tensor<float>(Shape{2, 3, 2, 2});
  EXPECT_THROW(conv2d(x, even), ConfigError);
}

TEST(BatchNorm, Examples) {
  Tensor<double> x(Shape{1, 1, 1, 3}, std::vector<double>{-1.0, 0.0, 5.0});
  auto id = BatchNormParams<double>::identity(1, 0.0);
  EXPECT_EQ(batchnorm_infer(x, id), x);

  BatchNormParams<double> bn{Tensor<double>::vector(std::vector<double>{2.0}), Tensor<double>::vector(std::vector<double>{1.0}),
                             Tensor<double>::vector(std::vector<double>{3.0}), Tensor<double>::vector(std::vector<double>{4.0}), 0.0};
  EXPECT_DOUBLE_EQ(batchnorm_infer(x, bn)(0, 0, 0, 2), 3.0);

  bn.gamma = Tensor<double>::vector(std::vector<double>{0.0});
  const auto y = batchnorm_infer(x, bn);
  for (double v : y.data()) EXPECT_EQ(v, 1.0);

  EXPECT_THROW(batchnorm_infer(Tensor<double>(Shape{1, 2, 1, 1}), bn), ShapeError);
}

TEST(PixelShuffle, IndexMap) {
  Tensor<float> x(Shape{1, 4, 1, 1}, std::vector<float>{1, 2, 3, 4});
  const auto y = pixel_shuffle(x, 2);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y(0, 0, 0, 0), 1);
  EXPECT_EQ(y(0, 0, 0, 1), 2);
  EXPECT_EQ(y(0, 0, 1, 0), 3);
  EXPECT_EQ(y(0, 0, 1, 1), 4);
  EXPECT_EQ(pixel_unshuffle(y, 2), x);
  EXPECT_EQ(pixel_shuffle(x, 1), x);
  EXPECT_EQ(pixel_unshuffle(x, 1), x);
}

TEST(PixelShuffle, GeneralMapAndRoundTrip) {
  Rng rng(8);
  Tensor<float> x(Shape{2, 18, 3, 4});
  rng.fill_uniform(x, -1, 1);
  const std::size_t r = 3;
  const auto y = pixel_shuffle(x, r);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t h = 0; h < 3; ++h)
      for (std::size_t w = 0; w < 4; ++w)
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < r; ++j) EXPECT_EQ(y(1, c, h * r + i, w * r + j), x(1, c * r * r + i * r + j, h, w));
  EXPECT_EQ(pixel_unshuffle(y, r), x);
  EXPECT_EQ(pixel_shuffle(pixel_unshuffle(y, r), r), y);
  EXPECT_THROW(pixel_shuffle(Tensor<float>(Shape{1, 3, 2, 2}), 2), ShapeError);
  EXPECT_THROW(pixel_unshuffle(Tensor<float>(Shape{1, 1, 3, 2}), 2), ShapeError);
}

TEST(Elementwise, Ops) {
  Rng rng(9);
  Tensor<float> x(Shape{1, 2, 3, 3});
  rng.fill_uniform(x, -2, 2);
  EXPECT_EQ(mul(x, Tensor<float>(x.shape(), 1.0f)), x);
  EXPECT_THROW(add(x, Tensor<float>(Shape{1, 2, 3, 2})), ShapeError);

  Tensor<float> a(Shape{1, 2, 2, 2}, 1.0f), b(Shape{1, 3, 2, 2}, 2.0f);
  const std::vector<Tensor<float>> parts{a, b};
  const auto cat = concat_channels<float>(parts);
  EXPECT_EQ(cat.c(), 5u);
  EXPECT_EQ(cat(0, 1, 1, 1), 1.0f);
  EXPECT_EQ(cat(0, 2, 0, 0), 2.0f);

  Tensor<float> q(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  EXPECT_FLOAT_EQ(global_avg_pool(q)[0], 2.5f);

  const auto s = sigmoid(Tensor<float>(Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(s[0], 0.5f);

  Tensor<float> neg(Shape{1, 2, 1, 2}, std::vector<float>{-2, 3, -4, 5});
  const auto pr = prelu(neg, Tensor<float>::vector(std::vector<float>{0.5f, 0.25f}));
  EXPECT_FLOAT_EQ(pr[0], -1.0f);
  EXPECT_FLOAT_EQ(pr[1], 3.0f);
  EXPECT_FLOAT_EQ(pr[2], -1.0f);

  const auto cs = channel_scale(neg, Tensor<float>::vector(std::vector<float>{2.0f, -1.0f}));
  EXPECT_FLOAT_EQ(cs[1], 6.0f);
  EXPECT_FLOAT_EQ(cs[3], -5.0f);
}

TEST(RepeatChannels, NearestUpsampleAfterShuffle) {
  Rng rng(10);
  Tensor<float> x(Shape{1, 3, 4, 5});
  rng.fill_uniform(x, 0, 1);
  const auto up = pixel_shuffle(repeat_channels(x, 4), 2);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t h = 0; h < 8; ++h)
      for (std::size_t w = 0; w < 10; ++w) EXPECT_EQ(up(0, c, h, w), x(0, c, h / 2, w / 2));
}
