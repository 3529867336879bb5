// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "fusion_toy.hpp"
#include "syenet/network.hpp"

using namespace sye;

namespace {

std::vector<double> xs_pm2() { return {-2, -1, 0, 1, 2}; }
std::vector<double> squares(const std::vector<double>& xs) {
  std::vector<double> y;
  for (double x : xs) y.push_back(x * x);
  return y;
}

// fused scalar map sampled at -1, 0, 1 gives its quadratic coefficients exactly
std::array<double, 3> coefficients(const toy::Branches& b) {
  const auto y = toy::eval(b, {-1.0, 0.0, 1.0});
  return {y[1], (y[2] - y[0]) / 2.0, (y[2] + y[0]) / 2.0 - y[1]};
}

SyeNetConfig config_for(Task task) {
  SyeNetConfig c;
  c.task = task;
  return c;
}

}  // namespace

TEST(Qcu, Examples) {
  Tensor<double> two(Shape{1, 1, 1, 1}, 2.0), three(Shape{1, 1, 1, 1}, 3.0);
  EXPECT_DOUBLE_EQ(qcu(two, three, QcuParams<double>{Tensor<double>::vector(std::vector<double>{0.5})})[0], 6.5);

  Rng rng(1);
  Tensor<double> f1(Shape{2, 3, 4, 4});
  rng.fill_uniform(f1, -1, 1);
  EXPECT_EQ(qcu(f1, Tensor<double>(f1.shape(), 1.0), QcuParams<double>{Tensor<double>::vector(3)}), f1);

  const auto c = qcu(Tensor<double>(f1.shape()), Tensor<double>(f1.shape()),
                     QcuParams<double>{Tensor<double>::vector(std::vector<double>{1.0, -2.0, 0.25})});
  for (std::size_t i = 0; i < c.numel(); ++i) EXPECT_EQ(c[i], (std::vector<double>{1.0, -2.0, 0.25})[(i / 16) % 3]);
  EXPECT_THROW(qcu(f1, Tensor<double>(Shape{2, 3, 4, 3}), QcuParams<double>{Tensor<double>::vector(3)}),
               ShapeError);
  EXPECT_THROW(qcu(f1, f1, QcuParams<double>{Tensor<double>::vector(2)}), ShapeError);
}

TEST(FuseVariant, AddOfNegationIsZero) {
  Rng rng(2);
  Tensor<double> f(Shape{1, 2, 3, 3});
  rng.fill_uniform(f, -1, 1);
  Tensor<double> neg(f.shape());
  for (std::size_t i = 0; i < f.numel(); ++i) neg[i] = -f[i];
  FusionParams<double> p;
  p.kind = Fusion::add;
  const auto sum = fuse_variant(f, neg, p);
  for (double v : sum.data()) EXPECT_EQ(v, 0.0);
  p.kind = Fusion::mul;
  EXPECT_EQ(fuse_variant(f, Tensor<double>(f.shape(), 1.0), p), f);
}

TEST(FuseVariant, CatConvScalarIsAffine) {
  auto b = toy::make(Fusion::cat_conv);
  b.c.weight[0] = 1.5, b.c.bias[0] = -0.5, b.s.weight[0] = -2.0, b.s.bias[0] = 0.75;
  b.fuse.cat_conv = Conv2dParams<double>::same(1, 2, 1, 1);
  b.fuse.cat_conv.weight[0] = 0.3;
  b.fuse.cat_conv.weight[1] = -1.1;
  b.fuse.cat_conv.bias[0] = 0.2;
  const auto k = coefficients(b);
  EXPECT_NEAR(k[2], 0.0, 1e-14);
  EXPECT_NEAR(k[1], 0.3 * 1.5 + -1.1 * -2.0, 1e-14);
  EXPECT_NEAR(k[0], 0.3 * -0.5 + -1.1 * 0.75 + 0.2, 1e-14);
}

TEST(FuseVariant, MulQuadraticCoefficients) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    auto b = toy::make(Fusion::mul);
    for (double* p : b.coords()) *p = rng.uniform(-2, 2);
    const double wc = b.c.weight[0], bc = b.c.bias[0], ws = b.s.weight[0], bs = b.s.bias[0];
    const auto k = coefficients(b);
    EXPECT_NEAR(k[2], wc * ws, 1e-12);
    EXPECT_NEAR(k[1], wc * bs + ws * bc, 1e-12);
    EXPECT_NEAR(k[0], bc * bs, 1e-12);
    // the qcu bias shifts only the constant term
    b.fuse.kind = Fusion::qcu;
    const auto q = coefficients(b);
    EXPECT_NEAR(q[2], k[2], 1e-12);
    EXPECT_NEAR(q[1], k[1], 1e-12);
    EXPECT_NEAR(q[0], k[0] + b.fuse.qcu.bias[0], 1e-12);
  }
}

TEST(FuseVariant, MulRootsAndQcuBreaksThem) {
  auto b = toy::make(Fusion::mul);
  b.c.weight[0] = 2.0, b.c.bias[0] = 3.0, b.s.weight[0] = -0.5, b.s.bias[0] = 1.0;
  const auto y = toy::eval(b, {-1.5, 2.0});
  EXPECT_NEAR(y[0], 0.0, 1e-15);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
  b.fuse.kind = Fusion::qcu;
  b.fuse.qcu.bias[0] = 0.4;
  const auto q = toy::eval(b, {-1.5, 2.0});
  EXPECT_NEAR(q[0], 0.4, 1e-15);
  EXPECT_NEAR(q[1], 0.4, 1e-15);
}

TEST(FusionExpressiveness, QcuFitsSquareExactly) {
  const auto xs = xs_pm2();
  const auto fit = toy::fit(Fusion::qcu, xs, squares(xs), 11);
  EXPECT_LT(fit.residual, 1e-10) << fit.iterations;
}

TEST(FusionExpressiveness, AddStopsAtBestAffine) {
  const auto xs = xs_pm2();
  const auto ys = squares(xs);
  const double affine = oracle::lsq_residual({std::vector<double>(xs.size(), 1.0), xs}, ys);
  EXPECT_NEAR(affine, 14.0, 1e-12);
  const auto fit = toy::fit(Fusion::add, xs, ys, 12);
  EXPECT_NEAR(fit.residual, affine, 1e-8 * affine);
  EXPECT_GT(fit.residual, 0.5);
}

TEST(ChannelAttention, ZeroWeightsHalve) {
  ChannelAttentionParams<double> ca{Conv2dParams<double>::same(2, 4, 1, 1), Conv2dParams<double>::same(4, 2, 1, 1)};
  Rng rng(4);
  Tensor<double> x(Shape{2, 4, 3, 3});
  rng.fill_uniform(x, -1, 1);
  const auto y = channel_attention(x, ca);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i] / 2);
}

TEST(ChannelAttention, ScaleStrictlyInsideUnitInterval) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    ChannelAttentionParams<double> ca{Conv2dParams<double>::same(4, 8, 1, 1), Conv2dParams<double>::same(8, 4, 1, 1)};
    rng.fill_uniform(ca.reduce.weight, -3, 3);
    rng.fill_uniform(ca.expand.weight, -3, 3);
    rng.fill_uniform(ca.expand.bias, -3, 3);
    Tensor<double> x(Shape{1, 8, 4, 4});
    rng.fill_uniform(x, -2, 2);
    const auto scale = channel_attention_scale(x, ca);
    for (double s : scale.data()) {
      EXPECT_GT(s, 0.0);
      EXPECT_LT(s, 1.0);
    }
  }
}

TEST(ChannelAttention, PoolOfConstantPlanes) {
  Tensor<double> x(Shape{1, 2, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) x[i] = 0.7, x[9 + i] = -1.2;
  const auto p = global_avg_pool(x);
  EXPECT_DOUBLE_EQ(p[0], 0.7);
  EXPECT_DOUBLE_EQ(p[1], -1.2);
  ChannelAttentionParams<double> bad{Conv2dParams<double>::same(1, 3, 1, 1), Conv2dParams<double>::same(3, 1, 1, 1)};
  EXPECT_THROW(channel_attention(x, bad), ShapeError);
}

TEST(Forward, OutputShapes) {
  {
    const auto m = build_model<float>(config_for(Task::sr), 1);
    EXPECT_EQ(forward(m, Tensor<float>(Shape{1, 3, 16, 16})).shape(), (Shape{1, 3, 32, 32}));
  }
  {
    auto c = config_for(Task::sr);
    c.scale = 3;
    const auto m = build_model<float>(c, 1);
    EXPECT_EQ(forward(m, Tensor<float>(Shape{2, 3, 5, 7})).shape(), (Shape{2, 3, 15, 21}));
  }
  {
    const auto m = build_model<float>(config_for(Task::isp), 1);
    EXPECT_EQ(forward(m, Tensor<float>(Shape{1, 1, 16, 12})).shape(), (Shape{1, 3, 16, 12}));
    EXPECT_THROW(forward(m, Tensor<float>(Shape{1, 1, 15, 12})), ShapeError);
  }
  {
    const auto m = build_model<float>(config_for(Task::lle), 1);
    EXPECT_EQ(forward(m, Tensor<float>(Shape{1, 3, 9, 10})).shape(), (Shape{1, 3, 9, 10}));
    EXPECT_THROW(forward(m, Tensor<float>(Shape{1, 1, 9, 10})), ShapeError);
  }
}

TEST(Forward, ClampedToUnitRange) {
  const auto m = build_model<float>(config_for(Task::lle), 2);
  Tensor<float> x(Shape{1, 3, 8, 8});
  Rng rng(2);
  rng.fill_uniform(x, -5, 5);
  const auto y = forward(m, x);
  for (float v : y.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Forward, IspHeadPacksRggb) {
  Tensor<double> mosaic(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto packed = pixel_unshuffle(mosaic, 2);
  EXPECT_EQ(packed.shape(), (Shape{1, 4, 1, 1}));
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(packed[c], static_cast<double>(c + 1));
}

TEST(Forward, TrainingMatchesFoldedForAllTasks) {
  for (Task task : {Task::sr, Task::isp, Task::lle})
    for (bool prelu : {false, true}) {
      auto c = config_for(task);
      c.head_prelu = prelu;
      c.global_skip = task != Task::isp;
      auto m = build_model<float>(c, 3);
      const auto r = verify_model_equivalence(m, fold_model(m), 3, 1e-4, 9);
      EXPECT_TRUE(r.pass) << to_string(task) << " " << r.max_abs_diff;
    }
  for (Fusion f : {Fusion::add, Fusion::mul, Fusion::cat_conv}) {
    auto c = config_for(Task::sr);
    c.fusion = f;
    auto m = build_model<double>(c, 4);
    EXPECT_TRUE(verify_model_equivalence(m, fold_model(m), 2, 1e-9, 9).pass) << to_string(f);
  }
}

TEST(Forward, GlobalSkipStartsAsNearestUpsample) {
  auto c = config_for(Task::sr);
  c.global_skip = true;
  const auto m = build_model<double>(c, 5);
  Tensor<double> x(Shape{1, 3, 6, 6});
  Rng rng(5);
  rng.fill_uniform(x, 0.1, 0.9);
  const auto y = forward_unclamped(m, x);
  // zero mixing weights leave only the tail bias, which starts at zero
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t h = 0; h < 12; ++h)
      for (std::size_t w = 0; w < 12; ++w) EXPECT_NEAR(y(0, ch, h, w), x(0, ch, h / 2, w / 2), 1e-12);
}

TEST(ParamCount, ClosedForm) {
  FoldedConv<float> one{Conv2dParams<float>::same(1, 1, 1, 1)};
  EXPECT_EQ(one.param_count(), 2u);
  FoldedConv<float> five{Conv2dParams<float>::same(8, 8, 5, 5)};
  EXPECT_EQ(five.param_count(), 1608u);

  const auto folded = fold_model(build_model<float>(SyeNetConfig{}, 1));
  const std::size_t w = 8;
  const std::size_t expected = 3 * (w * w * 25 + w) + (w * w * 9 + w) + (w * w + w) + 2 * w +
                               (w * (w / 2) + w / 2) + ((w / 2) * w + w) + (w * w * 9 + w);
  EXPECT_EQ(param_count(folded, false), expected);
  EXPECT_EQ(expected, 6156u);
  EXPECT_GE(param_count(folded, false), 4000u);
  EXPECT_LE(param_count(folded, false), 7000u);
  const std::size_t head = 3 * w * 9 + w, tail = w * 12 * 9 + 12;
  EXPECT_EQ(param_count(folded, true), expected + head + tail);
  EXPECT_EQ(backbone_conv_count(folded), 6u);
  EXPECT_GT(param_count(build_model<float>(SyeNetConfig{}, 1), false), expected);
}

TEST(Config, Validation) {
  SyeNetConfig c;
  c.width = 6;
  c.ca_reduction = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SyeNetConfig{};
  c.scale = 5;
  EXPECT_THROW(build_model<float>(c, 0), ConfigError);
  c = SyeNetConfig{};
  c.branch_menu = {{2, false}};
  EXPECT_THROW(c.validate(), ConfigError);
}
