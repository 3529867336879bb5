// SPDX-License-Identifier: Apache-2.0
#include "syenet/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "graph.hpp"
#include "syenet/rng.hpp"

namespace sye {

namespace {

// Fixed 8-lane accumulation: deterministic, and independent lanes let the
// compiler keep the loop in vector registers without reassociating.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
T sum(const T* a, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
typename Tape<T>::Id Tape<T>::push(Tensor<T> value, bool requires_grad,
                                   std::function<void(Tape&, Id)> bw) {
  nodes_.push_back(Node{std::move(value), requires_grad, std::move(bw)});
  return nodes_.size() - 1;
}

template <typename T>
Tensor<T>& Tape<T>::grad_ref(Id id) {
  auto& g = grads_[id];
  if (g.empty()) g = Tensor<T>(nodes_[id].value.shape());
  return g;
}

template <typename T>
typename Tape<T>::Id Tape<T>::input(Tensor<T> value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

template <typename T>
typename Tape<T>::Id Tape<T>::param(const Tensor<T>& value) {
  if (auto it = param_ids_.find(&value); it != param_ids_.end()) return it->second;
  const Id id = push(value, true, nullptr);
  param_ids_.emplace(&value, id);
  return id;
}

template <typename T>
typename Tape<T>::Id Tape<T>::conv(Id x, const Conv2dParams<T>& p) {
  const Id w = param(p.weight);
  const Id b = param(p.bias);
  Tensor<T> y = conv2d(value(x), p);
  const Padding pad = p.padding;
  const std::size_t kh = p.kh();
  const std::size_t kw = p.kw();
  return push(std::move(y), true, [x, w, b, pad, kh, kw](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    const Tensor<T>& xin = t.nodes_[x].value;
    const Tensor<T>& wt = t.nodes_[w].value;
    Tensor<T>& dw = t.grad_ref(w);
    Tensor<T>& db = t.grad_ref(b);
    Tensor<T>* dx = t.needs(x) ? &t.grad_ref(x) : nullptr;
    const std::size_t c_out = dy.c();
    const std::size_t h_out = dy.h();
    const std::size_t w_out = dy.w();
    const std::size_t hw = h_out * w_out;
    const std::size_t k = xin.c() * kh * kw;
    std::vector<T> cols;
    std::vector<T> dcols;
    for (std::size_t n = 0; n < dy.n(); ++n) {
      detail::im2col(xin, n, kh, kw, pad, h_out, w_out, cols);
      for (std::size_t o = 0; o < c_out; ++o) {
        const T* g = dy.plane(n, o);
        db[o] += sum(g, hw);
        T* dwrow = dw.data().data() + o * k;
        for (std::size_t kk = 0; kk < k; ++kk) dwrow[kk] += dot(g, cols.data() + kk * hw, hw);
      }
      if (dx) {
        dcols.assign(k * hw, T(0));
        for (std::size_t o = 0; o < c_out; ++o) {
          const T* g = dy.plane(n, o);
          const T* wrow = wt.data().data() + o * k;
          for (std::size_t kk = 0; kk < k; ++kk) {
            const T wv = wrow[kk];
            T* dst = dcols.data() + kk * hw;
            for (std::size_t q = 0; q < hw; ++q) dst[q] += wv * g[q];
          }
        }
        detail::col2im(dcols, n, kh, kw, pad, h_out, w_out, *dx);
      }
    }
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::batchnorm(Id x, const BatchNormParams<T>& bn) {
  bn.validate();
  // leaves first: push() may reallocate and invalidate references into nodes_
  const Id g = param(bn.gamma);
  const Id b = param(bn.beta);
  const Tensor<T>& xin = value(x);
  if (bn.channels() != xin.c()) throw ShapeError("batchnorm: channel mismatch on tape");
  const std::size_t C = xin.c();
  const std::size_t hw = xin.h() * xin.w();
  const std::size_t M = xin.n() * hw;
  std::vector<T> mean(C), inv_std(C);
  if (bn_mode_ == BnMode::batch_stats) {
    std::vector<T> var(C), var_unbiased(C);
    for (std::size_t c = 0; c < C; ++c) {
      T s = T(0);
      for (std::size_t n = 0; n < xin.n(); ++n) s += sum(xin.plane(n, c), hw);
      mean[c] = s / static_cast<T>(M);
      T ss = T(0);
      for (std::size_t n = 0; n < xin.n(); ++n) {
        const T* src = xin.plane(n, c);
        for (std::size_t q = 0; q < hw; ++q) ss += (src[q] - mean[c]) * (src[q] - mean[c]);
      }
      var[c] = ss / static_cast<T>(M);
      var_unbiased[c] = M > 1 ? ss / static_cast<T>(M - 1) : var[c];
      inv_std[c] = T(1) / std::sqrt(var[c] + bn.epsilon);
    }
    batch_stats_.push_back(BatchStat{&bn, mean, var_unbiased});
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = bn.running_mean[c];
      inv_std[c] = T(1) / std::sqrt(bn.running_var[c] + bn.epsilon);
    }
  }
  Tensor<T> xhat(xin.shape());
  Tensor<T> y(xin.shape());
  for (std::size_t n = 0; n < xin.n(); ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* src = xin.plane(n, c);
      T* xh = xhat.plane(n, c);
      T* dst = y.plane(n, c);
      for (std::size_t q = 0; q < hw; ++q) {
        xh[q] = (src[q] - mean[c]) * inv_std[c];
        dst[q] = xh[q] * bn.gamma[c] + bn.beta[c];
      }
    }
  }
  const bool batch = bn_mode_ == BnMode::batch_stats;
  return push(std::move(y), true,
              [x, g, b, batch, xhat = std::move(xhat), inv_std](Tape& t, Id self) {
                const Tensor<T>& dy = t.grads_[self];
                const Tensor<T>& gamma = t.nodes_[g].value;
                Tensor<T>& dgamma = t.grad_ref(g);
                Tensor<T>& dbeta = t.grad_ref(b);
                Tensor<T>* dx = t.needs(x) ? &t.grad_ref(x) : nullptr;
                const std::size_t hw = dy.h() * dy.w();
                const T M = static_cast<T>(dy.n() * hw);
                for (std::size_t c = 0; c < dy.c(); ++c) {
                  T sdy = T(0), sdyx = T(0);
                  for (std::size_t n = 0; n < dy.n(); ++n) {
                    sdy += sum(dy.plane(n, c), hw);
                    sdyx += dot(dy.plane(n, c), xhat.plane(n, c), hw);
                  }
                  dgamma[c] += sdyx;
                  dbeta[c] += sdy;
                  if (!dx) continue;
                  const T scale = gamma[c] * inv_std[c];
                  for (std::size_t n = 0; n < dy.n(); ++n) {
                    const T* gp = dy.plane(n, c);
                    const T* xh = xhat.plane(n, c);
                    T* dst = dx->plane(n, c);
                    if (batch) {
                      for (std::size_t q = 0; q < hw; ++q) {
                        dst[q] += scale * (gp[q] - sdy / M - xh[q] * sdyx / M);
                      }
                    } else {
                      for (std::size_t q = 0; q < hw; ++q) dst[q] += scale * gp[q];
                    }
                  }
                }
              });
}

template <typename T>
typename Tape<T>::Id Tape<T>::concat(const std::vector<Id>& xs) {
  std::vector<Tensor<T>> parts;
  parts.reserve(xs.size());
  bool rg = false;
  for (Id id : xs) {
    parts.push_back(value(id));
    rg = rg || needs(id);
  }
  Tensor<T> y = concat_channels<T>(parts);
  return push(std::move(y), rg, [xs](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    const std::size_t hw = dy.h() * dy.w();
    std::size_t c0 = 0;
    for (Id id : xs) {
      const std::size_t c = t.nodes_[id].value.c();
      if (t.needs(id)) {
        Tensor<T>& dx = t.grad_ref(id);
        for (std::size_t n = 0; n < dy.n(); ++n) {
          const T* src = dy.plane(n, c0);
          T* dst = dx.plane(n, 0);
          for (std::size_t q = 0; q < c * hw; ++q) dst[q] += src[q];
        }
      }
      c0 += c;
    }
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::add(Id a, Id b) {
  Tensor<T> y = sye::add(value(a), value(b));
  return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    if (t.needs(a)) add_into(t.grad_ref(a), dy);
    if (t.needs(b)) add_into(t.grad_ref(b), dy);
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::mul(Id a, Id b) {
  Tensor<T> y = sye::mul(value(a), value(b));
  return push(std::move(y), needs(a) || needs(b), [a, b](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    const Tensor<T>& va = t.nodes_[a].value;
    const Tensor<T>& vb = t.nodes_[b].value;
    if (t.needs(a)) {
      Tensor<T>& da = t.grad_ref(a);
      for (std::size_t i = 0; i < dy.numel(); ++i) da[i] += dy[i] * vb[i];
    }
    if (t.needs(b)) {
      Tensor<T>& db = t.grad_ref(b);
      for (std::size_t i = 0; i < dy.numel(); ++i) db[i] += dy[i] * va[i];
    }
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::add_channel_bias(Id x, const Tensor<T>& bias) {
  const Id b = param(bias);
  Tensor<T> y = sye::add_channel_bias(value(x), bias);
  return push(std::move(y), true, [x, b](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    const std::size_t hw = dy.h() * dy.w();
    Tensor<T>& dbias = t.grad_ref(b);
    for (std::size_t n = 0; n < dy.n(); ++n)
      for (std::size_t c = 0; c < dy.c(); ++c) dbias[c] += sum(dy.plane(n, c), hw);
    if (t.needs(x)) add_into(t.grad_ref(x), dy);
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::global_avg_pool(Id x) {
  Tensor<T> y = sye::global_avg_pool(value(x));
  return push(std::move(y), needs(x), [x](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    Tensor<T>& dx = t.grad_ref(x);
    const std::size_t hw = dx.h() * dx.w();
    const T inv = T(1) / static_cast<T>(hw);
    for (std::size_t n = 0; n < dx.n(); ++n) {
      for (std::size_t c = 0; c < dx.c(); ++c) {
        const T g = dy(n, c, 0, 0) * inv;
        T* dst = dx.plane(n, c);
        for (std::size_t q = 0; q < hw; ++q) dst[q] += g;
      }
    }
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::sigmoid(Id x) {
  Tensor<T> y = sye::sigmoid(value(x));
  return push(std::move(y), needs(x), [x](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    const Tensor<T>& yv = t.nodes_[self].value;
    Tensor<T>& dx = t.grad_ref(x);
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] += dy[i] * yv[i] * (T(1) - yv[i]);
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::channel_scale(Id x, Id s) {
  Tensor<T> y = sye::channel_scale(value(x), value(s));
  return push(std::move(y), needs(x) || needs(s), [x, s](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    const Tensor<T>& xv = t.nodes_[x].value;
    const Tensor<T>& sv = t.nodes_[s].value;
    const bool per_sample = sv.n() == xv.n() && sv.c() == xv.c() && sv.h() == 1 && sv.w() == 1;
    const std::size_t hw = dy.h() * dy.w();
    Tensor<T>* dx = t.needs(x) ? &t.grad_ref(x) : nullptr;
    Tensor<T>* ds = t.needs(s) ? &t.grad_ref(s) : nullptr;
    for (std::size_t n = 0; n < dy.n(); ++n) {
      for (std::size_t c = 0; c < dy.c(); ++c) {
        const T* g = dy.plane(n, c);
        if (dx) {
          const T f = per_sample ? sv(n, c, 0, 0) : sv[c];
          T* dst = dx->plane(n, c);
          for (std::size_t q = 0; q < hw; ++q) dst[q] += g[q] * f;
        }
        if (ds) {
          const T v = dot(g, xv.plane(n, c), hw);
          if (per_sample) (*ds)(n, c, 0, 0) += v;
          else (*ds)[c] += v;
        }
      }
    }
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::pixel_shuffle(Id x, std::size_t r) {
  Tensor<T> y = sye::pixel_shuffle(value(x), r);
  return push(std::move(y), needs(x), [x, r](Tape& t, Id self) {
    add_into(t.grad_ref(x), sye::pixel_unshuffle(t.grads_[self], r));
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::pixel_unshuffle(Id x, std::size_t r) {
  Tensor<T> y = sye::pixel_unshuffle(value(x), r);
  return push(std::move(y), needs(x), [x, r](Tape& t, Id self) {
    add_into(t.grad_ref(x), sye::pixel_shuffle(t.grads_[self], r));
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::prelu(Id x, const Tensor<T>& slope) {
  const Id a = param(slope);
  Tensor<T> y = sye::prelu(value(x), slope);
  return push(std::move(y), true, [x, a](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    const Tensor<T>& xv = t.nodes_[x].value;
    const Tensor<T>& av = t.nodes_[a].value;
    Tensor<T>& da = t.grad_ref(a);
    Tensor<T>* dx = t.needs(x) ? &t.grad_ref(x) : nullptr;
    const std::size_t hw = dy.h() * dy.w();
    for (std::size_t n = 0; n < dy.n(); ++n) {
      for (std::size_t c = 0; c < dy.c(); ++c) {
        const T* g = dy.plane(n, c);
        const T* xp = xv.plane(n, c);
        T acc = T(0);
        for (std::size_t q = 0; q < hw; ++q) {
          if (xp[q] <= T(0)) acc += g[q] * xp[q];
        }
        da[c] += acc;
        if (dx) {
          T* dst = dx->plane(n, c);
          for (std::size_t q = 0; q < hw; ++q) dst[q] += xp[q] > T(0) ? g[q] : av[c] * g[q];
        }
      }
    }
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::repeat_channels(Id x, std::size_t times) {
  Tensor<T> y = sye::repeat_channels(value(x), times);
  return push(std::move(y), needs(x), [x, times](Tape& t, Id self) {
    const Tensor<T>& dy = t.grads_[self];
    Tensor<T>& dx = t.grad_ref(x);
    const std::size_t hw = dx.h() * dx.w();
    for (std::size_t n = 0; n < dx.n(); ++n)
      for (std::size_t c = 0; c < dx.c(); ++c)
        for (std::size_t k = 0; k < times; ++k) {
          const T* src = dy.plane(n, c * times + k);
          T* dst = dx.plane(n, c);
          for (std::size_t q = 0; q < hw; ++q) dst[q] += src[q];
        }
  });
}

template <typename T>
void Tape<T>::backward(Id output, const Tensor<T>& seed) {
  if (output >= nodes_.size()) throw ShapeError("backward: unknown tape node");
  if (seed.shape() != nodes_[output].value.shape()) {
    throw ShapeError("backward: seed " + to_string(seed.shape()) + " does not match output " +
                     to_string(nodes_[output].value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor<T>());
  grads_[output] = seed;
  visits_ = 0;
  for (std::size_t i = output + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || !node.requires_grad || grads_[i].empty()) continue;
    node.backward(*this, i);
    ++visits_;
  }
}

template <typename T>
const Tensor<T>* Tape<T>::grad(Id id) const {
  if (id >= grads_.size() || grads_[id].empty()) return nullptr;
  return &grads_[id];
}

template <typename T>
const Tensor<T>* Tape<T>::param_grad(const Tensor<T>& param) const {
  auto it = param_ids_.find(&param);
  return it == param_ids_.end() ? nullptr : grad(it->second);
}

namespace {

template <typename T>
struct TapeOps {
  using Value = typename Tape<T>::Id;
  Tape<T>& tape;

  Value conv(Value x, const Conv2dParams<T>& p) { return tape.conv(x, p); }
  Value batchnorm(Value x, const BatchNormParams<T>& bn) { return tape.batchnorm(x, bn); }
  Value concat(const std::vector<Value>& xs) { return tape.concat(xs); }
  Value add(Value a, Value b) { return tape.add(a, b); }
  Value mul(Value a, Value b) { return tape.mul(a, b); }
  Value add_channel_bias(Value x, const Tensor<T>& b) { return tape.add_channel_bias(x, b); }
  Value global_avg_pool(Value x) { return tape.global_avg_pool(x); }
  Value sigmoid(Value x) { return tape.sigmoid(x); }
  Value channel_scale(Value x, Value s) { return tape.channel_scale(x, s); }
  Value pixel_shuffle(Value x, std::size_t r) { return tape.pixel_shuffle(x, r); }
  Value pixel_unshuffle(Value x, std::size_t r) { return tape.pixel_unshuffle(x, r); }
  Value prelu(Value x, const Tensor<T>& slope) { return tape.prelu(x, slope); }
  Value repeat_channels(Value x, std::size_t k) { return tape.repeat_channels(x, k); }
};

template <typename T, typename F>
void for_each_bn(SyeNet<T>& m, F&& f) {
  auto slot = [&](RepSlot<T>& s) {
    if (auto* b = std::get_if<ConvRepBlock<T>>(&s)) {
      for (auto& br : b->branches) {
        if (br.bn) f(*br.bn);
      }
    }
  };
  slot(m.head);
  slot(m.a1_complex[0]);
  slot(m.a1_complex[1]);
  slot(m.a1_simple);
  slot(m.a2_complex);
  slot(m.a2_simple);
  slot(m.final_conv);
  slot(m.tail);
}

}  // namespace

template <typename T>
typename Tape<T>::Id record_forward(Tape<T>& tape, const SyeNet<T>& model, const Tensor<T>& x) {
  check_input(model, x);
  TapeOps<T> ops{tape};
  return detail::run_graph(ops, model, tape.input(x));
}

template <typename T>
std::vector<Tensor<T>> backward(const SyeNet<T>& model, Tape<T>& tape, typename Tape<T>::Id output,
                                const Tensor<T>& loss_grad) {
  tape.backward(output, loss_grad);
  std::vector<Tensor<T>> grads;
  visit_parameters(model, [&](const std::string&, const Tensor<T>& t, ParamKind kind) {
    if (kind != ParamKind::trainable) return;
    const Tensor<T>* g = tape.param_grad(t);
    grads.push_back(g ? *g : Tensor<T>(t.shape()));
  });
  return grads;
}

template <typename T>
std::vector<Tensor<T>*> trainable_parameters(SyeNet<T>& model) {
  std::vector<Tensor<T>*> out;
  visit_parameters(model, [&](const std::string&, Tensor<T>& t, ParamKind kind) {
    if (kind == ParamKind::trainable) out.push_back(&t);
  });
  return out;
}

template <typename T>
std::vector<std::string> trainable_names(const SyeNet<T>& model) {
  std::vector<std::string> out;
  visit_parameters(model, [&](const std::string& name, const Tensor<T>&, ParamKind kind) {
    if (kind == ParamKind::trainable) out.push_back(name);
  });
  return out;
}

template <typename T>
void apply_batch_stats(SyeNet<T>& model, const Tape<T>& tape, double momentum) {
  std::unordered_map<const BatchNormParams<T>*, BatchNormParams<T>*> lookup;
  for_each_bn(model, [&](BatchNormParams<T>& bn) { lookup.emplace(&bn, &bn); });
  const T m = static_cast<T>(momentum);
  for (const auto& stat : tape.batch_stats()) {
    auto it = lookup.find(stat.bn);
    if (it == lookup.end()) throw ModeError("batch statistics recorded for a different model");
    BatchNormParams<T>& bn = *it->second;
    for (std::size_t c = 0; c < stat.mean.size(); ++c) {
      bn.running_mean[c] = (T(1) - m) * bn.running_mean[c] + m * stat.mean[c];
      bn.running_var[c] = (T(1) - m) * bn.running_var[c] + m * stat.var_unbiased[c];
    }
  }
}

GradCheckReport grad_check(const std::function<double()>& f, std::vector<GradProbe> probes,
                           double h, double tol, double floor) {
  GradCheckReport report;
  report.tolerance = tol;
  for (auto& p : probes) {
    const double saved = *p.coordinate;
    *p.coordinate = saved + h;
    const double up = f();
    *p.coordinate = saved - h;
    const double down = f();
    *p.coordinate = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(p.analytic), std::abs(numeric), floor});
    const double rel = std::abs(p.analytic - numeric) / denom;
    report.entries.push_back({p.label, p.analytic, numeric, rel});
    if (report.worst.empty() || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = p.label;
    }
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

GradCheckReport check_model_gradients(const SyeNetConfig& config, std::uint64_t seed,
                                      const ModelGradCheckOptions& options) {
  SyeNetConfig cfg = config;
  cfg.precision = Precision::f64;
  SyeNet<double> model = build_model<double>(cfg, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  // Non-trivial BN statistics and QCU biases so every path carries signal.
  visit_parameters(model, [&](const std::string& name, Tensor<double>& t, ParamKind kind) {
    if (kind != ParamKind::trainable) return;
    if (name.find(".bn.") != std::string::npos || name.find(".qcu.") != std::string::npos ||
        name.find(".bias") != std::string::npos) {
      for (auto& v : t.data()) v += rng.uniform(-0.2, 0.2);
    }
  });

  const std::size_t side = cfg.task == Task::isp ? 2 * options.side : options.side;
  Tensor<double> x(Shape{options.batch, cfg.input_channels(), side, side});
  rng.fill_uniform(x, 0.0, 1.0);
  const std::size_t out_side = options.side * (cfg.task == Task::sr ? cfg.scale : 1) *
                               (cfg.task == Task::isp ? 2 : 1);
  Tensor<double> target(Shape{options.batch, 3, out_side, out_side});
  rng.fill_uniform(target, 0.0, 1.0);

  auto loss_of = [&](const Tensor<double>& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += (y[i] - target[i]) * (y[i] - target[i]);
    return 0.5 * acc / static_cast<double>(y.numel());
  };

  Tape<double> tape(BnMode::batch_stats);
  const auto out = record_forward(tape, model, x);
  const Tensor<double>& y = tape.value(out);
  Tensor<double> seed_grad(y.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) {
    seed_grad[i] = (y[i] - target[i]) / static_cast<double>(y.numel());
  }
  const auto grads = backward(model, tape, out, seed_grad);
  const auto params = trainable_parameters(model);
  const auto names = trainable_names(model);

  std::vector<GradProbe> probes;
  auto add_probe = [&](std::size_t p) {
    const std::size_t i = rng.index(params[p]->numel());
    probes.push_back({names[p] + "[" + std::to_string(i) + "]", &(*params[p])[i], grads[p][i]});
  };
  for (std::size_t p = 0; p < params.size(); ++p) add_probe(p);
  while (probes.size() < options.min_coords) add_probe(rng.index(params.size()));

  auto f = [&]() {
    Tape<double> t(BnMode::batch_stats);
    return loss_of(t.value(record_forward(t, model, x)));
  };
  return grad_check(f, std::move(probes), options.h, options.tol);
}

#define SYE_INSTANTIATE(T)                                                                      \
  template class Tape<T>;                                                                       \
  template typename Tape<T>::Id record_forward(Tape<T>&, const SyeNet<T>&, const Tensor<T>&);    \
  template std::vector<Tensor<T>> backward(const SyeNet<T>&, Tape<T>&, typename Tape<T>::Id,    \
                                           const Tensor<T>&);                                   \
  template std::vector<Tensor<T>*> trainable_parameters(SyeNet<T>&);                            \
  template std::vector<std::string> trainable_names(const SyeNet<T>&);                          \
  template void apply_batch_stats(SyeNet<T>&, const Tape<T>&, double);

SYE_INSTANTIATE(float)
SYE_INSTANTIATE(double)

#undef SYE_INSTANTIATE

}  // namespace sye
