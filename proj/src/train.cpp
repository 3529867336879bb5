// SPDX-License-Identifier: Apache-2.0
#include "syenet/train.hpp"

#include <cmath>
#include <ostream>

#include "syenet/autograd.hpp"
#include "syenet/metrics.hpp"
#include "syenet/optim.hpp"

namespace sye {

void TrainConfig::validate() const {
  if (batch == 0) throw ConfigError("batch must be positive");
  if (!(lr >= 0.0) || !(lr_floor >= 0.0) || !(warmup_lr >= 0.0)) {
    throw ConfigError("learning rates must be non-negative");
  }
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw ConfigError("bn momentum must lie in [0, 1]");
  loss_params.validate();
  mask.validate();
}

namespace {

template <typename T>
struct Batch {
  Tensor<T> input;
  Tensor<T> target;
};

template <typename T>
Batch<T> make_batch(const std::vector<Sample<T>>& samples) {
  std::vector<const Tensor<T>*> in, tg;
  for (const auto& s : samples) {
    in.push_back(&s.input);
    tg.push_back(&s.target);
  }
  return {stack(in), stack(tg)};
}

template <typename T>
Batch<T> draw(const Dataset<T>& data, Rng& rng, std::size_t batch, bool aug) {
  std::vector<Sample<T>> picked;
  picked.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& s = data.samples[rng.index(data.size())];
    const auto a = aug ? static_cast<Augment>(rng.index(kAugmentCount)) : Augment::identity;
    picked.push_back(augment_sample(s, a, data.spec.task));
  }
  return make_batch(picked);
}

template <typename T>
Tensor<T> output_mask(const Tensor<T>& input_mask, const Tensor<T>& target) {
  return upsample_mask(input_mask, target.h() / input_mask.h());
}

// One gradient step on `loss_grad(y)`; returns the loss value.
template <typename T, typename LossFn>
double step(SyeNet<T>& model, AdamCosine<T>& opt, const std::vector<Tensor<T>*>& params,
            const Tensor<T>& input, double momentum, LossFn&& loss_fn) {
  Tape<T> tape(BnMode::batch_stats);
  const auto out = record_forward(tape, model, input);
  Tensor<T> grad;
  const double loss = loss_fn(tape.value(out), grad);
  const auto grads = backward(model, tape, out, grad);
  opt.step(params, grads);
  apply_batch_stats(model, tape, momentum);
  return loss;
}

}  // namespace

template <typename T>
double evaluate_psnr(const SyeNet<T>& model, const Dataset<T>& data) {
  if (data.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (const auto& s : data.samples) acc += psnr(forward(model, s.input), s.target);
  return acc / static_cast<double>(data.size());
}

template <typename T>
double bicubic_psnr(const Dataset<T>& data) {
  if (data.spec.task != Task::sr) throw ConfigError("bicubic baseline is defined for SR only");
  if (data.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (const auto& s : data.samples) {
    Tensor<T> up = resize_bicubic(s.input, s.target.h(), s.target.w());
    for (auto& v : up.data()) v = std::clamp(v, T(0), T(1));
    acc += psnr(up, s.target);
  }
  return acc / static_cast<double>(data.size());
}

template <typename T>
double warmup_objective(const SyeNet<T>& model, const Tensor<T>& masked_input, const Tensor<T>& target,
                        const Tensor<T>& mask) {
  Tape<T> tape(BnMode::batch_stats);
  const auto out = record_forward(tape, model, masked_input);
  return masked_lp_loss(tape.value(out), target, output_mask(mask, target), 1);
}

template <typename T>
TrainResult<T> train_toy(SyeNet<T> model, const Dataset<T>& train, const Dataset<T>& val,
                         const TrainConfig& config) {
  config.validate();
  if (model.mode != Mode::training) throw ModeError("cannot train a folded model");
  if (train.size() == 0) throw ConfigError("training set is empty");
  if (train.spec.task != model.config.task) throw ConfigError("dataset task does not match the model");

  TrainResult<T> result;
  Rng rng(config.seed);
  const auto params = trainable_parameters(model);

  if (config.warmup_iters > 0) {
    std::vector<Sample<T>> probe_samples(train.samples.begin(),
                                         train.samples.begin() + std::min(config.batch, train.size()));
    const Batch<T> probe = make_batch(probe_samples);
    MaskSpec probe_spec = config.mask;
    probe_spec.seed = config.mask.seed ^ 0x70726f6265ULL;
    const auto probe_masked = warmup_mask(probe.input, probe_spec);
    result.warmup_before = warmup_objective(model, probe_masked.masked, probe.target, probe_masked.mask);

    AdamCosine<T> opt(AdamConfig{config.warmup_lr, config.warmup_lr, 0}, params);
    for (std::size_t k = 0; k < config.warmup_iters; ++k) {
      const Batch<T> b = draw(train, rng, config.batch, config.augment);
      MaskSpec spec = config.mask;
      spec.seed = config.mask.seed + k + 1;
      const auto m = warmup_mask(b.input, spec);
      const Tensor<T> out_mask = output_mask(m.mask, b.target);
      const double lr = opt.lr();
      const double loss = step(model, opt, params, m.masked, config.bn_momentum,
                               [&](const Tensor<T>& y, Tensor<T>& g) {
                                 g = masked_lp_loss_grad(y, b.target, out_mask, 1);
                                 return masked_lp_loss(y, b.target, out_mask, 1);
                               });
      result.warmup_log.push_back({k + 1, lr, loss});
    }
    result.warmup_after = warmup_objective(model, probe_masked.masked, probe.target, probe_masked.mask);
  }

  AdamCosine<T> opt(AdamConfig{config.lr, config.lr_floor, config.iterations}, params);
  for (std::size_t k = 0; k < config.iterations; ++k) {
    const Batch<T> b = draw(train, rng, config.batch, config.augment);
    const double lr = opt.lr();
    const double loss = step(model, opt, params, b.input, config.bn_momentum,
                             [&](const Tensor<T>& y, Tensor<T>& g) {
                               if (config.loss == LossKind::oa) {
                                 g = oa_loss_grad(y, b.target, config.loss_params);
                                 return oa_loss(y, b.target, config.loss_params);
                               }
                               g = lp_loss_grad(y, b.target, 1);
                               return lp_loss(y, b.target, 1);
                             });
    TrainLogRow row{k + 1, lr, loss};
    const bool last = k + 1 == config.iterations;
    if (val.size() > 0 && (last || (config.val_every > 0 && (k + 1) % config.val_every == 0))) {
      row.val_psnr = evaluate_psnr(model, val);
    }
    result.log.push_back(row);
  }
  result.val_psnr = evaluate_psnr(model, val);
  result.model = std::move(model);
  return result;
}

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& rows) {
  out << "iter,lr,loss,val_psnr\n";
  const auto old = out.precision(10);
  for (const auto& r : rows) {
    out << r.iter << ',' << r.lr << ',' << r.loss << ',';
    if (!std::isnan(r.val_psnr)) out << r.val_psnr;
    out << '\n';
  }
  out.precision(old);
}

#define SYE_INSTANTIATE(T)                                                                     \
  template double evaluate_psnr(const SyeNet<T>&, const Dataset<T>&);                          \
  template double bicubic_psnr(const Dataset<T>&);                                             \
  template double warmup_objective(const SyeNet<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                   const Tensor<T>&);                                          \
  template TrainResult<T> train_toy(SyeNet<T>, const Dataset<T>&, const Dataset<T>&,           \
                                    const TrainConfig&);

SYE_INSTANTIATE(float)
SYE_INSTANTIATE(double)

#undef SYE_INSTANTIATE

}  // namespace sye
