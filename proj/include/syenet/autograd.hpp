// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation for the network ops.
//
// A Tape records every forward op together with what its backward pass needs.
// Parameters enter the tape as leaves keyed by the address of the model tensor
// they came from, so gradients can be read back per parameter after backward().
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "syenet/network.hpp"
#include "syenet/tensor.hpp"

namespace sye {

/// How batch norm behaves on the tape: batch statistics (training) or running
/// statistics (inference semantics, still differentiable w.r.t. gamma/beta).
enum class BnMode { batch_stats, running_stats };

template <typename T>
class Tape {
 public:
  using Id = std::size_t;

  /// Batch statistics observed by a batch-stat BN node; running stats are not
  /// touched during forward, the trainer folds these in afterwards.
  struct BatchStat {
    const BatchNormParams<T>* bn;
    std::vector<T> mean;
    std::vector<T> var_unbiased;
  };

  explicit Tape(BnMode bn_mode = BnMode::batch_stats) : bn_mode_(bn_mode) {}

  Id input(Tensor<T> value, bool requires_grad = false);
  /// Leaf for a model tensor. Repeated calls with the same tensor return the same leaf.
  Id param(const Tensor<T>& value);

  Id conv(Id x, const Conv2dParams<T>& p);
  Id batchnorm(Id x, const BatchNormParams<T>& bn);
  Id concat(const std::vector<Id>& xs);
  Id add(Id a, Id b);
  Id mul(Id a, Id b);
  Id add_channel_bias(Id x, const Tensor<T>& bias);
  Id global_avg_pool(Id x);
  Id sigmoid(Id x);
  Id channel_scale(Id x, Id s);
  Id pixel_shuffle(Id x, std::size_t r);
  Id pixel_unshuffle(Id x, std::size_t r);
  Id prelu(Id x, const Tensor<T>& slope);
  Id repeat_channels(Id x, std::size_t times);

  const Tensor<T>& value(Id id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }
  BnMode bn_mode() const { return bn_mode_; }
  const std::vector<BatchStat>& batch_stats() const { return batch_stats_; }

  /// Reverse pass from `output` seeded with d(loss)/d(output). Each recorded op's
  /// backward runs at most once, in reverse recording order.
  void backward(Id output, const Tensor<T>& seed);

  /// Gradient of a node after backward(); nullptr if nothing flowed into it.
  const Tensor<T>* grad(Id id) const;
  /// Gradient for a model tensor that entered via param(); nullptr if unused.
  const Tensor<T>* param_grad(const Tensor<T>& param) const;
  /// Number of op backward functions executed by the last backward().
  std::size_t backward_visits() const { return visits_; }

 private:
  struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    std::function<void(Tape&, Id)> backward;
  };

  Id push(Tensor<T> value, bool requires_grad, std::function<void(Tape&, Id)> bw);
  bool needs(Id id) const { return nodes_[id].requires_grad; }
  Tensor<T>& grad_ref(Id id);

  BnMode bn_mode_;
  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  std::unordered_map<const Tensor<T>*, Id> param_ids_;
  std::vector<BatchStat> batch_stats_;
  std::size_t visits_ = 0;
};

/// Records the training-mode network graph (unclamped output) on `tape`.
template <typename T>
typename Tape<T>::Id record_forward(Tape<T>& tape, const SyeNet<T>& model, const Tensor<T>& x);

/// Runs the reverse pass and returns one gradient per trainable parameter, in
/// visit_parameters order. Parameters the tape never saw get zero gradients.
template <typename T>
std::vector<Tensor<T>> backward(const SyeNet<T>& model, Tape<T>& tape, typename Tape<T>::Id output,
                                const Tensor<T>& loss_grad);

/// Mutable pointers to the trainable tensors of a model, in visit_parameters order.
template <typename T>
std::vector<Tensor<T>*> trainable_parameters(SyeNet<T>& model);
template <typename T>
std::vector<std::string> trainable_names(const SyeNet<T>& model);

/// running = (1 - momentum) * running + momentum * batch, for each BN seen on the tape.
template <typename T>
void apply_batch_stats(SyeNet<T>& model, const Tape<T>& tape, double momentum);

// ---------------------------------------------------------------------------
// Finite-difference verification.

struct GradProbe {
  std::string label;
  double* coordinate = nullptr;
  double analytic = 0.0;
};

struct GradCheckEntry {
  std::string label;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::string worst;
  double tolerance = 0.0;
  bool pass = false;
};

/// Central differences (f(x+h) - f(x-h)) / 2h at each probe coordinate, compared
/// with the analytic value: |a - n| / max(|a|, |n|, floor). Coordinates are restored.
GradCheckReport grad_check(const std::function<double()>& f, std::vector<GradProbe> probes,
                           double h, double tol, double floor = 1e-6);

struct ModelGradCheckOptions {
  std::size_t batch = 2;
  std::size_t side = 6;
  std::size_t min_coords = 20;
  double h = 1e-5;
  double tol = 1e-4;
};

/// Whole-model check in double precision: L2 loss against a random target,
/// batch-stat BN, at least one coordinate from every trainable tensor.
GradCheckReport check_model_gradients(const SyeNetConfig& config, std::uint64_t seed,
                                      const ModelGradCheckOptions& options = {});

}  // namespace sye
