// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "op_gradcheck.hpp"
#include "oracles.hpp"
#include "syenet/autograd.hpp"

using namespace sye;

TEST(Tape, ZeroUpstreamGivesZeroGrads) {
  Rng rng(1);
  auto conv = Conv2dParams<double>::same(2, 2, 3, 3);
  rng.fill_uniform(conv.weight, -1, 1);
  Tensor<double> x(Shape{1, 2, 4, 4});
  rng.fill_uniform(x, -1, 1);
  Tape<double> tape;
  const auto in = tape.input(x, true);
  const auto y = tape.sigmoid(tape.conv(in, conv));
  tape.backward(y, Tensor<double>(tape.value(y).shape()));
  for (double g : tape.grad(in)->data()) EXPECT_EQ(g, 0.0);
  for (double g : tape.param_grad(conv.weight)->data()) EXPECT_EQ(g, 0.0);
}

TEST(Tape, QcuScalarGradients) {
  // y = f1*f2 + b at f1=2, f2=3 with upstream 1
  Tape<double> tape;
  const auto f1 = tape.input(Tensor<double>(Shape{1, 1, 1, 1}, 2.0), true);
  const auto f2 = tape.input(Tensor<double>(Shape{1, 1, 1, 1}, 3.0), true);
  const auto bias = Tensor<double>::vector(std::vector<double>{0.5});
  const auto y = tape.add_channel_bias(tape.mul(f1, f2), bias);
  EXPECT_DOUBLE_EQ(tape.value(y)[0], 6.5);
  tape.backward(y, Tensor<double>(Shape{1, 1, 1, 1}, 1.0));
  EXPECT_DOUBLE_EQ((*tape.grad(f1))[0], 3.0);
  EXPECT_DOUBLE_EQ((*tape.grad(f2))[0], 2.0);
  EXPECT_DOUBLE_EQ((*tape.param_grad(bias))[0], 1.0);
}

TEST(Tape, SquareOfParameter) {
  Tensor<double> theta(Shape{1, 1, 1, 1}, 1.7);
  Tape<double> tape;
  const auto x = tape.input(Tensor<double>(Shape{1, 1, 1, 1}, 1.0));
  auto conv = Conv2dParams<double>::same(1, 1, 1, 1);
  conv.weight = theta;
  const auto a = tape.conv(x, conv);
  const auto y = tape.mul(a, a);
  tape.backward(y, Tensor<double>(Shape{1, 1, 1, 1}, 1.0));
  EXPECT_DOUBLE_EQ((*tape.param_grad(conv.weight))[0], 2 * 1.7);
  EXPECT_EQ(tape.grad(x), nullptr);
}

TEST(Tape, FanOutAccumulates) {
  Tape<double> tape;
  const auto x = tape.input(Tensor<double>(Shape{1, 1, 1, 2}, std::vector<double>{1.0, -2.0}), true);
  const auto y = tape.add(tape.add(x, x), tape.mul(x, x));
  tape.backward(y, Tensor<double>(Shape{1, 1, 1, 2}, 1.0));
  EXPECT_DOUBLE_EQ((*tape.grad(x))[0], 2 + 2 * 1.0);
  EXPECT_DOUBLE_EQ((*tape.grad(x))[1], 2 + 2 * -2.0);
}

TEST(GradCheck, FlagsWrongGradient) {
  double theta = 0.8;
  const auto good = grad_check([&] { return theta * theta; }, {{"t", &theta, 1.6}}, 1e-5, 1e-6);
  EXPECT_TRUE(good.pass);
  EXPECT_NEAR(oracle::central_diff([&] { return theta * theta; }, theta, 1e-5), 1.6, 1e-9);
  const auto bad = grad_check([&] { return theta * theta; }, {{"t", &theta, 1.7}}, 1e-5, 1e-4);
  EXPECT_FALSE(bad.pass);
  EXPECT_EQ(bad.worst, "t");
}

TEST(GradCheck, EveryOpMatchesFiniteDifference) {
  auto cases = opcheck::all_cases(7);
  EXPECT_GE(cases.size(), 15u);
  for (auto& c : cases) {
    const auto r = opcheck::run(c, 20, 11);
    EXPECT_TRUE(r.pass) << c.name << " worst " << r.worst << " rel " << r.max_rel_error;
    EXPECT_GE(r.entries.size(), 20u) << c.name;
  }
}

TEST(GradCheck, LossGradients) {
  for (const auto& lc : opcheck::loss_checks(13)) {
    EXPECT_LE(lc.max_rel_error, 1e-6) << lc.name << " " << lc.max_rel_error;
    EXPECT_GT(lc.coords, 10u) << lc.name;
  }
}

TEST(GradCheck, FullModel) {
  for (Task task : {Task::sr, Task::lle}) {
    SyeNetConfig cfg;
    cfg.task = task;
    cfg.head_prelu = true;
    cfg.global_skip = true;
    const auto r = check_model_gradients(cfg, 3);
    EXPECT_TRUE(r.pass) << to_string(task) << " worst " << r.worst << " rel " << r.max_rel_error;
    EXPECT_GE(r.entries.size(), 20u);
  }
  SyeNetConfig cat;
  cat.fusion = Fusion::cat_conv;
  EXPECT_TRUE(check_model_gradients(cat, 4).pass);
}

TEST(ModelBackward, UnusedParamsGetZerosAndNamesAlign) {
  SyeNetConfig cfg;
  auto m = build_model<double>(cfg, 2);
  const auto names = trainable_names(m);
  const auto params = trainable_parameters(m);
  ASSERT_EQ(names.size(), params.size());
  Tensor<double> x(Shape{1, 3, 6, 6});
  Rng rng(2);
  rng.fill_uniform(x, 0, 1);
  Tape<double> tape;
  const auto out = record_forward(tape, m, x);
  const auto grads = backward(m, tape, out, Tensor<double>(tape.value(out).shape(), 1.0));
  ASSERT_EQ(grads.size(), params.size());
  for (std::size_t i = 0; i < grads.size(); ++i) EXPECT_EQ(grads[i].shape(), params[i]->shape()) << names[i];
}

TEST(ModelBackward, BatchStatsUpdateRunningBuffers) {
  SyeNetConfig cfg;
  auto m = build_model<double>(cfg, 3);
  Tensor<double> x(Shape{2, 3, 6, 6});
  Rng rng(3);
  rng.fill_uniform(x, 0, 1);
  Tape<double> tape(BnMode::batch_stats);
  record_forward(tape, m, x);
  ASSERT_FALSE(tape.batch_stats().empty());
  const auto& first = tape.batch_stats().front();
  const auto& head = std::get<ConvRepBlock<double>>(m.head);
  const BatchNormParams<double>* bn = nullptr;
  for (const auto& b : head.branches)
    if (b.bn) {
      bn = &*b.bn;
      break;
    }
  ASSERT_EQ(first.bn, bn);
  const double mean0 = first.mean[0], var0 = first.var_unbiased[0];
  apply_batch_stats(m, tape, 0.1);
  EXPECT_NEAR(bn->running_mean[0], 0.1 * mean0, 1e-15);
  EXPECT_NEAR(bn->running_var[0], 0.9 + 0.1 * var0, 1e-15);
}
