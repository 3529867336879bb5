// SPDX-License-Identifier: Apache-2.0
//
// Scalar two-branch toy: f1 = Wc*x + Bc, f2 = Ws*x + Bs (1x1 convs, one channel),
// fused by the library. Shared by the network unit tests and the acceptance binary.
#pragma once

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "syenet/autograd.hpp"
#include "syenet/network.hpp"
#include "syenet/rng.hpp"

namespace toy {

using sye::Conv2dParams;
using sye::Fusion;
using sye::FusionParams;
using sye::Shape;
using sye::Tensor;

struct Branches {
  Conv2dParams<double> c = Conv2dParams<double>::same(1, 1, 1, 1);
  Conv2dParams<double> s = Conv2dParams<double>::same(1, 1, 1, 1);
  FusionParams<double> fuse;

  // theta = [Wc, Bc, Ws, Bs, qcu bias]
  std::vector<double*> coords() { return {&c.weight[0], &c.bias[0], &s.weight[0], &s.bias[0], &fuse.qcu.bias[0]}; }
};

inline Branches make(Fusion kind) {
  Branches b;
  b.fuse.kind = kind;
  b.fuse.qcu.bias = Tensor<double>::vector(1);
  return b;
}

inline Tensor<double> column(const std::vector<double>& xs) {
  return Tensor<double>(Shape{xs.size(), 1, 1, 1}, xs);
}

/// Library forward: fuse_variant(conv(x), conv(x)).
inline Tensor<double> eval(const Branches& b, const std::vector<double>& xs) {
  const auto x = column(xs);
  return sye::fuse_variant(sye::conv2d(x, b.c), sye::conv2d(x, b.s), b.fuse);
}

/// Jacobian of the fused outputs with respect to theta, taken from the tape.
inline std::vector<std::vector<double>> jacobian(Branches& b, const std::vector<double>& xs) {
  std::vector<std::vector<double>> j(xs.size(), std::vector<double>(5, 0.0));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sye::Tape<double> tape;
    const auto x = tape.input(column(xs));
    const auto f1 = tape.conv(x, b.c);
    const auto f2 = tape.conv(x, b.s);
    auto y = b.fuse.kind == Fusion::add ? tape.add(f1, f2) : tape.mul(f1, f2);
    if (b.fuse.kind == Fusion::qcu) y = tape.add_channel_bias(y, b.fuse.qcu.bias);
    Tensor<double> seed(tape.value(y).shape());
    seed[i] = 1.0;
    tape.backward(y, seed);
    const Tensor<double>* tensors[5] = {&b.c.weight, &b.c.bias, &b.s.weight, &b.s.bias, &b.fuse.qcu.bias};
    for (std::size_t k = 0; k < 5; ++k) {
      const auto* g = tape.param_grad(*tensors[k]);
      j[i][k] = g ? (*g)[0] : 0.0;
    }
  }
  return j;
}

inline double sse(const Branches& b, const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto y = eval(b, xs);
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (y[i] - ys[i]) * (y[i] - ys[i]);
  return s;
}

struct Fit {
  Branches model;
  double residual = 0.0;
  int iterations = 0;
};

/// Levenberg fit of theta from a random start.
inline Fit fit(Fusion kind, const std::vector<double>& xs, const std::vector<double>& ys, std::uint64_t seed,
               int max_iters = 500) {
  Fit out{make(kind), 0.0, 0};
  sye::Rng rng(seed);
  for (double* p : out.model.coords()) *p = rng.uniform(-1.0, 1.0);
  double cost = sse(out.model, xs, ys);
  double lambda = 1e-2;
  for (; out.iterations < max_iters && cost > 1e-26; ++out.iterations) {
    const auto j = jacobian(out.model, xs);
    const auto y = eval(out.model, xs);
    std::vector<std::vector<double>> jtj(5, std::vector<double>(5, 0.0));
    std::vector<double> jtr(5, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t a = 0; a < 5; ++a) {
        jtr[a] -= j[i][a] * (y[i] - ys[i]);
        for (std::size_t c = 0; c < 5; ++c) jtj[a][c] += j[i][a] * j[i][c];
      }
    bool improved = false;
    while (lambda < 1e12) {
      auto damped = jtj;
      for (std::size_t a = 0; a < 5; ++a) damped[a][a] += lambda;
      const auto step = oracle::solve(damped, jtr);
      Branches trial = out.model;
      auto tc = trial.coords();
      for (std::size_t a = 0; a < 5; ++a) *tc[a] += step[a];
      const double c = sse(trial, xs, ys);
      if (c < cost) {
        const bool stalled = cost - c <= 1e-15 * cost;
        out.model = trial;
        cost = c;
        lambda = std::max(lambda / 3.0, 1e-15);
        improved = !stalled;
        break;
      }
      lambda *= 3.0;
    }
    if (!improved) break;
  }
  out.residual = cost;
  return out;
}

}  // namespace toy
