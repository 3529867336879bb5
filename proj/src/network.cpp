// SPDX-License-Identifier: Apache-2.0
#include "syenet/network.hpp"

#include <algorithm>
#include <cmath>

#include "graph.hpp"
#include "syenet/rng.hpp"

namespace sye {

std::string to_string(Task t) {
  switch (t) {
    case Task::sr: return "sr";
    case Task::isp: return "isp";
    case Task::lle: return "lle";
  }
  return "?";
}

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::qcu: return "qcu";
    case Fusion::add: return "add";
    case Fusion::mul: return "mul";
    case Fusion::cat_conv: return "cat_conv";
  }
  return "?";
}

std::string to_string(Mode m) { return m == Mode::training ? "training" : "folded"; }
std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

std::vector<BranchChoice> default_branch_menu() {
  return {{0, false}, {0, true}, {3, true}, {1, false}};
}

void SyeNetConfig::validate() const {
  if (width == 0) throw ConfigError("width must be positive");
  if (task == Task::sr && (scale < 2 || scale > 4)) {
    throw ConfigError("SR scale must be 2, 3 or 4");
  }
  if (ca_reduction == 0 || width % ca_reduction != 0) {
    throw ConfigError("width must be divisible by ca_reduction");
  }
  if (branch_menu.empty()) throw ConfigError("branch menu is empty");
  for (const auto& b : branch_menu) {
    if (b.kernel != 0 && b.kernel % 2 == 0) throw ConfigError("branch kernels must be odd");
  }
  if (expansion == 0) throw ConfigError("expansion must be positive");
}

namespace {

constexpr std::size_t kA1Kernel = 5;
constexpr std::size_t kA2ComplexKernel = 3;
constexpr std::size_t kA2SimpleKernel = 1;
constexpr std::size_t kFinalKernel = 3;
constexpr std::size_t kHeadTailKernel = 3;

std::size_t tail_channels(const SyeNetConfig& cfg) {
  switch (cfg.task) {
    case Task::sr: return 3 * cfg.scale * cfg.scale;
    case Task::isp: return 12;
    case Task::lle: return 3;
  }
  return 3;
}

template <typename T>
Conv2dParams<T> random_pointwise(std::size_t c_out, std::size_t c_in, Rng& rng) {
  auto p = Conv2dParams<T>::same(c_out, c_in, 1, 1);
  const double bound = std::sqrt(3.0 / static_cast<double>(c_in));
  rng.fill_uniform(p.weight, -bound, bound);
  return p;
}

template <typename T>
RepSlot<T> fold_slot(const RepSlot<T>& slot) {
  if (const auto* block = std::get_if<ConvRepBlock<T>>(&slot)) return reparameterize(*block);
  return slot;
}

}  // namespace

template <typename T>
SyeNet<T> build_model(const SyeNetConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t w = config.width;
  auto layout = [&](std::size_t c_in, std::size_t c_out, std::size_t k) {
    return BlockLayout{c_in, c_out, k, config.expansion, config.branch_menu};
  };

  SyeNet<T> m;
  m.config = config;
  m.mode = Mode::training;
  const std::size_t head_in = config.task == Task::isp ? 4 : 3;
  m.head = make_block<T>(layout(head_in, w, kHeadTailKernel), rng);
  if (config.head_prelu) m.head_slope = Tensor<T>::vector(w, T(0.25));
  m.a1_complex[0] = make_block<T>(layout(w, w, kA1Kernel), rng);
  m.a1_complex[1] = make_block<T>(layout(w, w, kA1Kernel), rng);
  m.a1_simple = make_block<T>(layout(w, w, kA1Kernel), rng);
  m.a2_complex = make_block<T>(layout(w, w, kA2ComplexKernel), rng);
  m.a2_simple = make_block<T>(layout(w, w, kA2SimpleKernel), rng);
  for (auto& fz : m.fusion) {
    fz.kind = config.fusion;
    if (fz.kind == Fusion::qcu) fz.qcu.bias = Tensor<T>::vector(w);
    if (fz.kind == Fusion::cat_conv) fz.cat_conv = random_pointwise<T>(w, 2 * w, rng);
  }
  m.ca.reduce = random_pointwise<T>(w / config.ca_reduction, w, rng);
  m.ca.expand = random_pointwise<T>(w, w / config.ca_reduction, rng);
  m.final_conv = make_block<T>(layout(w, w, kFinalKernel), rng);
  m.tail = make_block<T>(layout(w, tail_channels(config), kHeadTailKernel), rng);
  if (config.global_skip) {
    // start out as the skip path alone
    std::get<ConvRepBlock<T>>(m.tail).pointwise.weight.fill(T(0));
  }
  return m;
}

template <typename T>
SyeNet<T> fold_model(const SyeNet<T>& model) {
  if (model.mode == Mode::folded) return model;
  SyeNet<T> out = model;
  out.mode = Mode::folded;
  out.head = fold_slot(model.head);
  out.a1_complex[0] = fold_slot(model.a1_complex[0]);
  out.a1_complex[1] = fold_slot(model.a1_complex[1]);
  out.a1_simple = fold_slot(model.a1_simple);
  out.a2_complex = fold_slot(model.a2_complex);
  out.a2_simple = fold_slot(model.a2_simple);
  out.final_conv = fold_slot(model.final_conv);
  out.tail = fold_slot(model.tail);
  return out;
}

template <typename T>
Tensor<T> qcu(const Tensor<T>& f1, const Tensor<T>& f2, const QcuParams<T>& params) {
  return add_channel_bias(mul(f1, f2), params.bias);
}

template <typename T>
Tensor<T> fuse_variant(const Tensor<T>& f1, const Tensor<T>& f2, const FusionParams<T>& params) {
  detail::EagerOps<T> ops;
  return detail::run_fusion(ops, params, f1, f2);
}

template <typename T>
Tensor<T> channel_attention_scale(const Tensor<T>& x, const ChannelAttentionParams<T>& params) {
  if (params.reduce.c_in() != x.c() || params.expand.c_out() != x.c()) {
    throw ShapeError("channel attention: parameters do not match " + std::to_string(x.c()) +
                     " channels");
  }
  if (params.reduce.c_out() == 0 || x.c() % params.reduce.c_out() != 0) {
    throw ConfigError("channel attention: channels not divisible by the reduction");
  }
  detail::EagerOps<T> ops;
  return detail::run_channel_attention(ops, params, x);
}

template <typename T>
Tensor<T> channel_attention(const Tensor<T>& x, const ChannelAttentionParams<T>& params) {
  return channel_scale(x, channel_attention_scale(x, params));
}

template <typename T>
void check_input(const SyeNet<T>& model, const Tensor<T>& x) {
  const auto& cfg = model.config;
  if (x.c() != cfg.input_channels()) {
    throw ShapeError(to_string(cfg.task) + " model expects " +
                     std::to_string(cfg.input_channels()) + " input channels, got " +
                     std::to_string(x.c()));
  }
  if (cfg.task == Task::isp && (x.h() % 2 != 0 || x.w() % 2 != 0)) {
    throw ShapeError("ISP input mosaic must have even height and width");
  }
}

template <typename T>
Tensor<T> forward_unclamped(const SyeNet<T>& model, const Tensor<T>& x) {
  check_input(model, x);
  detail::EagerOps<T> ops;
  return detail::run_graph(ops, model, x);
}

template <typename T>
Tensor<T> forward(const SyeNet<T>& model, const Tensor<T>& x) {
  Tensor<T> y = forward_unclamped(model, x);
  for (auto& v : y.data()) v = std::clamp(v, T(0), T(1));
  return y;
}

template <typename T>
std::size_t param_count(const SyeNet<T>& model, bool include_head_tail) {
  std::size_t total = 0;
  visit_parameters(model, [&](const std::string& name, const Tensor<T>& t, ParamKind kind) {
    if (kind != ParamKind::trainable) return;
    if (!include_head_tail && is_head_or_tail(name)) return;
    total += t.numel();
  });
  return total;
}

template <typename T>
std::size_t backbone_conv_count(const SyeNet<T>& model) {
  auto count = [](const RepSlot<T>& s) -> std::size_t {
    if (const auto* b = std::get_if<ConvRepBlock<T>>(&s)) return b->branches.size() + 1;
    return 1;
  };
  std::size_t total = count(model.a1_complex[0]) + count(model.a1_complex[1]) +
                      count(model.a1_simple) + count(model.a2_complex) +
                      count(model.a2_simple) + count(model.final_conv);
  for (const auto& fz : model.fusion) {
    if (fz.kind == Fusion::cat_conv) ++total;
  }
  return total;
}

template <typename T>
ModelEquivalenceReport verify_model_equivalence(const SyeNet<T>& reference,
                                                const SyeNet<T>& candidate, std::size_t trials,
                                                double tolerance, std::uint64_t seed,
                                                std::size_t side) {
  if (!(reference.config == candidate.config)) {
    throw ConfigError("verify: models were built from different configs");
  }
  if (trials == 0) throw ConfigError("verify: need at least one trial");
  Rng rng(seed);
  const auto& cfg = reference.config;
  const std::size_t s = cfg.task == Task::isp ? 2 * side : side;
  ModelEquivalenceReport report{0.0, tolerance, trials, false};
  for (std::size_t t = 0; t < trials; ++t) {
    Tensor<T> x(Shape{1, cfg.input_channels(), s, s});
    rng.fill_uniform(x, 0.0, 1.0);
    const auto a = forward_unclamped(reference, x);
    const auto b = forward_unclamped(candidate, x);
    report.max_abs_diff = std::max(report.max_abs_diff, static_cast<double>(max_abs_diff(a, b)));
  }
  report.pass = report.max_abs_diff <= tolerance;
  return report;
}

#define SYE_INSTANTIATE(T)                                                                       \
  template SyeNet<T> build_model<T>(const SyeNetConfig&, std::uint64_t);                         \
  template SyeNet<T> fold_model(const SyeNet<T>&);                                               \
  template Tensor<T> qcu(const Tensor<T>&, const Tensor<T>&, const QcuParams<T>&);               \
  template Tensor<T> fuse_variant(const Tensor<T>&, const Tensor<T>&, const FusionParams<T>&);   \
  template Tensor<T> channel_attention_scale(const Tensor<T>&, const ChannelAttentionParams<T>&); \
  template Tensor<T> channel_attention(const Tensor<T>&, const ChannelAttentionParams<T>&);      \
  template void check_input(const SyeNet<T>&, const Tensor<T>&);                                 \
  template Tensor<T> forward_unclamped(const SyeNet<T>&, const Tensor<T>&);                      \
  template Tensor<T> forward(const SyeNet<T>&, const Tensor<T>&);                                \
  template std::size_t param_count(const SyeNet<T>&, bool);                                      \
  template std::size_t backbone_conv_count(const SyeNet<T>&);                                    \
  template ModelEquivalenceReport verify_model_equivalence(                                      \
      const SyeNet<T>&, const SyeNet<T>&, std::size_t, double, std::uint64_t, std::size_t);

SYE_INSTANTIATE(float)
SYE_INSTANTIATE(double)

#undef SYE_INSTANTIATE

}  // namespace sye
