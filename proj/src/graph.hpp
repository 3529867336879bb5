// SPDX-License-Identifier: Apache-2.0
//
// The network graph written once against an abstract op backend. `Ops` supplies
// a Value type and the primitive ops; the eager backend evaluates tensors
// directly, the tape backend records them for reverse mode.
#pragma once

#include <variant>
#include <vector>

#include "syenet/network.hpp"

namespace sye::detail {

template <typename T, typename Ops>
typename Ops::Value run_slot(Ops& ops, const RepSlot<T>& slot, typename Ops::Value x) {
  using V = typename Ops::Value;
  if (const auto* folded = std::get_if<FoldedConv<T>>(&slot)) return ops.conv(x, folded->conv);
  const auto& block = std::get<ConvRepBlock<T>>(slot);
  std::vector<V> outs;
  outs.reserve(block.branches.size());
  for (const auto& b : block.branches) {
    V y = ops.conv(x, b.conv);
    if (b.bn) y = ops.batchnorm(y, *b.bn);
    outs.push_back(y);
  }
  return ops.conv(ops.concat(outs), block.pointwise);
}

template <typename T, typename Ops>
typename Ops::Value run_fusion(Ops& ops, const FusionParams<T>& fz, typename Ops::Value f1,
                               typename Ops::Value f2) {
  switch (fz.kind) {
    case Fusion::qcu:
      return ops.add_channel_bias(ops.mul(f1, f2), fz.qcu.bias);
    case Fusion::add:
      return ops.add(f1, f2);
    case Fusion::mul:
      return ops.mul(f1, f2);
    case Fusion::cat_conv:
      return ops.conv(ops.concat({f1, f2}), fz.cat_conv);
  }
  throw ConfigError("unknown fusion kind");
}

template <typename T, typename Ops>
typename Ops::Value run_channel_attention(Ops& ops, const ChannelAttentionParams<T>& ca,
                                          typename Ops::Value x) {
  auto s = ops.global_avg_pool(x);
  s = ops.conv(s, ca.reduce);
  s = ops.conv(s, ca.expand);
  return ops.sigmoid(s);
}

/// Unclamped network output.
template <typename T, typename Ops>
typename Ops::Value run_graph(Ops& ops, const SyeNet<T>& m, typename Ops::Value x) {
  const SyeNetConfig& cfg = m.config;
  auto h = cfg.task == Task::isp ? ops.pixel_unshuffle(x, 2) : x;
  h = run_slot(ops, m.head, h);
  if (m.head_slope) h = ops.prelu(h, *m.head_slope);

  auto c1 = run_slot(ops, m.a1_complex[1], run_slot(ops, m.a1_complex[0], h));
  auto s1 = run_slot(ops, m.a1_simple, h);
  auto a1 = run_fusion(ops, m.fusion[0], c1, s1);

  auto c2 = run_slot(ops, m.a2_complex, a1);
  auto s2 = run_slot(ops, m.a2_simple, a1);
  auto a2 = run_fusion(ops, m.fusion[1], c2, s2);

  auto attended = ops.channel_scale(a2, run_channel_attention(ops, m.ca, a2));
  auto y = run_slot(ops, m.tail, run_slot(ops, m.final_conv, attended));

  switch (cfg.task) {
    case Task::sr: {
      const std::size_t r = cfg.scale;
      if (cfg.global_skip) y = ops.add(y, ops.repeat_channels(x, r * r));
      return ops.pixel_shuffle(y, r);
    }
    case Task::isp:
      return ops.pixel_shuffle(y, 2);
    case Task::lle:
      if (cfg.global_skip) y = ops.add(y, x);
      return y;
  }
  throw ConfigError("unknown task");
}

/// Eager backend: inference semantics (batch norm with running statistics).
template <typename T>
struct EagerOps {
  using Value = Tensor<T>;

  Value conv(const Value& x, const Conv2dParams<T>& p) { return conv2d(x, p); }
  Value batchnorm(const Value& x, const BatchNormParams<T>& bn) { return batchnorm_infer(x, bn); }
  Value concat(const std::vector<Value>& xs) { return concat_channels<T>(xs); }
  Value add(const Value& a, const Value& b) { return sye::add(a, b); }
  Value mul(const Value& a, const Value& b) { return sye::mul(a, b); }
  Value add_channel_bias(const Value& x, const Tensor<T>& b) { return sye::add_channel_bias(x, b); }
  Value global_avg_pool(const Value& x) { return sye::global_avg_pool(x); }
  Value sigmoid(const Value& x) { return sye::sigmoid(x); }
  Value channel_scale(const Value& x, const Value& s) { return sye::channel_scale(x, s); }
  Value pixel_shuffle(const Value& x, std::size_t r) { return sye::pixel_shuffle(x, r); }
  Value pixel_unshuffle(const Value& x, std::size_t r) { return sye::pixel_unshuffle(x, r); }
  Value prelu(const Value& x, const Tensor<T>& slope) { return sye::prelu(x, slope); }
  Value repeat_channels(const Value& x, std::size_t k) { return sye::repeat_channels(x, k); }
};

}  // namespace sye::detail
