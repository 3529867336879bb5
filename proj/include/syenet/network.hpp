// SPDX-License-Identifier: Apache-2.0
//
// SYENet assembly: head, two asymmetric two-branch stages fused by a quadratic
// connection unit, squeeze-and-excitation channel attention, a final conv and a
// task specific tail. Every feature conv is a ConvRep slot that is either a
// multi-branch training block or its folded single conv.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "syenet/reparam.hpp"
#include "syenet/tensor.hpp"

namespace sye {

enum class Task { sr, isp, lle };
enum class Fusion { qcu, add, mul, cat_conv };
enum class Mode { training, folded };
enum class Precision { f32, f64 };

std::string to_string(Task t);
std::string to_string(Fusion f);
std::string to_string(Mode m);
std::string to_string(Precision p);

/// {K conv, K conv + BN, 3x3 conv + BN, 1x1 conv}; 3x3 shrinks to K when K < 3.
std::vector<BranchChoice> default_branch_menu();

struct SyeNetConfig {
  Task task = Task::sr;
  std::size_t scale = 2;  // SR upscale factor, 2..4
  std::size_t width = 8;
  Fusion fusion = Fusion::qcu;
  std::vector<BranchChoice> branch_menu = default_branch_menu();
  std::size_t expansion = 2;
  std::size_t ca_reduction = 2;
  bool head_prelu = false;
  /// Add the (upsampled) input to the tail output. SR repeats the input over the
  /// r*r sub-pixel channels before the shuffle, LLE adds it directly; ignored for ISP.
  /// A fresh model with the skip gets a zero tail mixing conv, so it starts as the skip.
  bool global_skip = false;
  Precision precision = Precision::f32;

  void validate() const;
  std::size_t input_channels() const { return task == Task::isp ? 1 : 3; }
  /// Spatial upscale between network input and output (ISP keeps the raw resolution).
  std::size_t output_scale() const { return task == Task::sr ? scale : 1; }
  bool operator==(const SyeNetConfig&) const = default;
};

template <typename T>
using RepSlot = std::variant<ConvRepBlock<T>, FoldedConv<T>>;

template <typename T>
struct QcuParams {
  Tensor<T> bias;  // 1 x C x 1 x 1, broadcast over space
};

/// Per-stage fusion parameters; only the member matching `kind` is populated.
template <typename T>
struct FusionParams {
  Fusion kind = Fusion::qcu;
  QcuParams<T> qcu;
  Conv2dParams<T> cat_conv;  // 2C -> C, 1x1
};

template <typename T>
struct ChannelAttentionParams {
  Conv2dParams<T> reduce;  // C -> C/r, 1x1
  Conv2dParams<T> expand;  // C/r -> C, 1x1
};

template <typename T>
struct SyeNet {
  SyeNetConfig config;
  Mode mode = Mode::training;
  RepSlot<T> head;
  std::optional<Tensor<T>> head_slope;
  std::array<RepSlot<T>, 2> a1_complex;
  RepSlot<T> a1_simple;
  RepSlot<T> a2_complex;
  RepSlot<T> a2_simple;
  std::array<FusionParams<T>, 2> fusion;
  ChannelAttentionParams<T> ca;
  RepSlot<T> final_conv;
  RepSlot<T> tail;
};

enum class ParamKind { trainable, buffer };

/// Randomly initialised training-mode model.
template <typename T>
SyeNet<T> build_model(const SyeNetConfig& config, std::uint64_t seed);

/// Folded copy of a training-mode model (a folded model is returned unchanged).
template <typename T>
SyeNet<T> fold_model(const SyeNet<T>& model);

template <typename T>
Tensor<T> qcu(const Tensor<T>& f1, const Tensor<T>& f2, const QcuParams<T>& params);

template <typename T>
Tensor<T> fuse_variant(const Tensor<T>& f1, const Tensor<T>& f2, const FusionParams<T>& params);

template <typename T>
Tensor<T> channel_attention_scale(const Tensor<T>& x, const ChannelAttentionParams<T>& params);
template <typename T>
Tensor<T> channel_attention(const Tensor<T>& x, const ChannelAttentionParams<T>& params);

/// Inference forward: BN uses running statistics, output clamped to [0, 1].
template <typename T>
Tensor<T> forward(const SyeNet<T>& model, const Tensor<T>& x);
/// Same graph without the final clamp.
template <typename T>
Tensor<T> forward_unclamped(const SyeNet<T>& model, const Tensor<T>& x);

/// Throws ShapeError when x does not fit the model's task.
template <typename T>
void check_input(const SyeNet<T>& model, const Tensor<T>& x);

template <typename T>
std::size_t param_count(const SyeNet<T>& model, bool include_head_tail);

/// Feature convolutions between head and tail (6 for a folded non-CAT_CONV model).
template <typename T>
std::size_t backbone_conv_count(const SyeNet<T>& model);

struct ModelEquivalenceReport {
  double max_abs_diff = 0.0;
  double tolerance = 0.0;
  std::size_t trials = 0;
  bool pass = false;
};

/// Random inputs through both models (unclamped outputs).
template <typename T>
ModelEquivalenceReport verify_model_equivalence(const SyeNet<T>& reference,
                                                const SyeNet<T>& candidate, std::size_t trials,
                                                double tolerance, std::uint64_t seed,
                                                std::size_t side = 12);

// ---------------------------------------------------------------------------
// Parameter traversal. The order is stable and defines both the weights-file
// tensor table and the gradient slot layout.

namespace detail {

template <typename Block, typename F>
void visit_block(const std::string& prefix, Block& block, F& f) {
  for (std::size_t i = 0; i < block.branches.size(); ++i) {
    auto& b = block.branches[i];
    const std::string p = prefix + ".branch" + std::to_string(i);
    f(p + ".conv.weight", b.conv.weight, ParamKind::trainable);
    f(p + ".conv.bias", b.conv.bias, ParamKind::trainable);
    if (b.bn) {
      f(p + ".bn.gamma", b.bn->gamma, ParamKind::trainable);
      f(p + ".bn.beta", b.bn->beta, ParamKind::trainable);
      f(p + ".bn.running_mean", b.bn->running_mean, ParamKind::buffer);
      f(p + ".bn.running_var", b.bn->running_var, ParamKind::buffer);
    }
  }
  f(prefix + ".pointwise.weight", block.pointwise.weight, ParamKind::trainable);
  f(prefix + ".pointwise.bias", block.pointwise.bias, ParamKind::trainable);
}

template <typename Slot, typename F>
void visit_slot(const std::string& prefix, Slot& slot, F& f) {
  std::visit(
      [&](auto& s) {
        if constexpr (requires { s.branches; }) {
          visit_block(prefix, s, f);
        } else {
          f(prefix + ".conv.weight", s.conv.weight, ParamKind::trainable);
          f(prefix + ".conv.bias", s.conv.bias, ParamKind::trainable);
        }
      },
      slot);
}

template <typename Fuse, typename F>
void visit_fusion(const std::string& prefix, Fuse& fz, F& f) {
  if (fz.kind == Fusion::qcu) f(prefix + ".qcu.bias", fz.qcu.bias, ParamKind::trainable);
  if (fz.kind == Fusion::cat_conv) {
    f(prefix + ".cat_conv.weight", fz.cat_conv.weight, ParamKind::trainable);
    f(prefix + ".cat_conv.bias", fz.cat_conv.bias, ParamKind::trainable);
  }
}

}  // namespace detail

/// Calls f(name, tensor, kind) for every parameter and buffer. Works on const
/// and mutable models; the tensor reference carries the model's constness.
template <typename Model, typename F>
void visit_parameters(Model& m, F&& f) {
  detail::visit_slot("head", m.head, f);
  if (m.head_slope) f("head.prelu.slope", *m.head_slope, ParamKind::trainable);
  detail::visit_slot("a1_complex0", m.a1_complex[0], f);
  detail::visit_slot("a1_complex1", m.a1_complex[1], f);
  detail::visit_slot("a1_simple", m.a1_simple, f);
  detail::visit_fusion("fuse1", m.fusion[0], f);
  detail::visit_slot("a2_complex", m.a2_complex, f);
  detail::visit_slot("a2_simple", m.a2_simple, f);
  detail::visit_fusion("fuse2", m.fusion[1], f);
  f("ca.reduce.weight", m.ca.reduce.weight, ParamKind::trainable);
  f("ca.reduce.bias", m.ca.reduce.bias, ParamKind::trainable);
  f("ca.expand.weight", m.ca.expand.weight, ParamKind::trainable);
  f("ca.expand.bias", m.ca.expand.bias, ParamKind::trainable);
  detail::visit_slot("final", m.final_conv, f);
  detail::visit_slot("tail", m.tail, f);
}

inline bool is_head_or_tail(const std::string& name) {
  return name.rfind("head.", 0) == 0 || name.rfind("tail.", 0) == 0;
}

}  // namespace sye
