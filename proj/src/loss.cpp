// SPDX-License-Identifier: Apache-2.0
#include "syenet/loss.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace sye {

void LossParams::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("loss alpha must be positive");
  if (p != 1 && p != 2) throw ConfigError("loss norm order p must be 1 or 2");
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double pow_p(double a, int p) { return p == 1 ? a : a * a; }

template <typename T>
void check_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  }
}

template <typename T>
std::vector<double> residual(const Tensor<T>& pred, const Tensor<T>& gt, std::size_t begin,
                             std::size_t end) {
  std::vector<double> d(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    d[i - begin] = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
  }
  return d;
}

// Size of one statistics group.
template <typename T>
std::size_t group_size(const Tensor<T>& t, const LossParams& params) {
  return params.per_image ? t.numel() / t.n() : t.numel();
}

// |d|^p * w and its derivative in d, mu and b held fixed.
struct Term {
  double value;
  double grad;
};

Term oa_term(double d, const ResidualStats& s, const LossParams& params) {
  const double ad = std::abs(d);
  const double lp = pow_p(ad, params.p);
  const double dlp = params.p == 1 ? sign(d) : 2.0 * d;
  if (s.degenerate) return {lp, dlp};
  const double e = d - s.mu;
  const double ae = std::abs(e);
  const double ex = std::exp(-params.alpha * pow_p(ae, params.p) / s.b);
  const double w = 1.0 - ex;
  const double dinner = params.p == 1 ? sign(e) : 2.0 * e;
  return {lp * w, dlp * w + lp * ex * params.alpha * dinner / s.b};
}

}  // namespace

ResidualStats residual_stats(std::span<const double> delta, int p) {
  if (p != 1 && p != 2) throw ConfigError("loss norm order p must be 1 or 2");
  ResidualStats s;
  if (delta.empty()) return s;
  double sum = 0.0;
  for (double d : delta) sum += d;
  s.mu = sum / static_cast<double>(delta.size());
  double ss = 0.0;
  for (double d : delta) ss += (d - s.mu) * (d - s.mu);
  s.sigma2 = ss / static_cast<double>(delta.size());
  s.degenerate = !(s.sigma2 > 0.0);
  if (!s.degenerate) s.b = p == 1 ? std::sqrt(s.sigma2 / 2.0) : 2.0 * s.sigma2;
  return s;
}

template <typename T>
DiffStats<T> diff_stats(const Tensor<T>& pred, const Tensor<T>& gt, int p) {
  check_same(pred, gt, "diff_stats");
  DiffStats<T> out;
  out.delta = Tensor<T>(pred.shape());
  for (std::size_t i = 0; i < pred.numel(); ++i) out.delta[i] = pred[i] - gt[i];
  const auto d = residual(pred, gt, 0, pred.numel());
  out.stats = residual_stats(d, p);
  return out;
}

double oa_weight(double delta, const ResidualStats& stats, const LossParams& params) {
  params.validate();
  if (stats.degenerate || !(stats.b > 0.0)) {
    throw DegenerateError("outlier weight undefined for zero residual variance");
  }
  return 1.0 - std::exp(-params.alpha * pow_p(std::abs(delta - stats.mu), params.p) / stats.b);
}

template <typename T>
std::vector<ResidualStats> loss_stats(const Tensor<T>& pred, const Tensor<T>& gt,
                                      const LossParams& params) {
  check_same(pred, gt, "oa_loss");
  params.validate();
  const std::size_t g = group_size(pred, params);
  std::vector<ResidualStats> out;
  for (std::size_t begin = 0; begin < pred.numel(); begin += g) {
    out.push_back(residual_stats(residual(pred, gt, begin, begin + g), params.p));
  }
  return out;
}

template <typename T>
double oa_loss_with_stats(const Tensor<T>& pred, const Tensor<T>& gt, const LossParams& params,
                          const std::vector<ResidualStats>& stats) {
  check_same(pred, gt, "oa_loss");
  params.validate();
  const std::size_t g = group_size(pred, params);
  if (stats.size() * g != pred.numel()) throw ShapeError("oa_loss: statistics do not match batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    acc += oa_term(d, stats[i / g], params).value;
  }
  return acc / static_cast<double>(pred.numel());
}

template <typename T>
double oa_loss(const Tensor<T>& pred, const Tensor<T>& gt, const LossParams& params) {
  return oa_loss_with_stats(pred, gt, params, loss_stats(pred, gt, params));
}

template <typename T>
Tensor<T> oa_loss_grad(const Tensor<T>& pred, const Tensor<T>& gt, const LossParams& params) {
  const auto stats = loss_stats(pred, gt, params);
  const std::size_t g = group_size(pred, params);
  const double inv_n = 1.0 / static_cast<double>(pred.numel());
  Tensor<T> out(pred.shape());
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    out[i] = static_cast<T>(oa_term(d, stats[i / g], params).grad * inv_n);
  }
  return out;
}

template <typename T>
double lp_loss(const Tensor<T>& pred, const Tensor<T>& gt, int p) {
  check_same(pred, gt, "lp_loss");
  if (p != 1 && p != 2) throw ConfigError("loss norm order p must be 1 or 2");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    acc += pow_p(std::abs(static_cast<double>(pred[i]) - static_cast<double>(gt[i])), p);
  }
  return acc / static_cast<double>(pred.numel());
}

template <typename T>
Tensor<T> lp_loss_grad(const Tensor<T>& pred, const Tensor<T>& gt, int p) {
  check_same(pred, gt, "lp_loss");
  if (p != 1 && p != 2) throw ConfigError("loss norm order p must be 1 or 2");
  const double inv_n = 1.0 / static_cast<double>(pred.numel());
  Tensor<T> out(pred.shape());
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    out[i] = static_cast<T>((p == 1 ? sign(d) : 2.0 * d) * inv_n);
  }
  return out;
}

namespace {

template <typename T>
bool masked_at(const Tensor<T>& mask, std::size_t n, std::size_t c,
               std::size_t h, std::size_t w) {
  return mask(n, mask.c() == 1 ? 0 : c, h, w) != T(0);
}

template <typename T>
void check_mask(const Tensor<T>& pred, const Tensor<T>& mask) {
  const Shape& s = pred.shape();
  const Shape& m = mask.shape();
  if (m.n != s.n || m.h != s.h || m.w != s.w || (m.c != 1 && m.c != s.c)) {
    throw ShapeError("mask " + to_string(m) + " does not cover " + to_string(s));
  }
}

}  // namespace

template <typename T>
double masked_lp_loss(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask, int p) {
  check_same(pred, gt, "masked_lp_loss");
  check_mask(pred, mask);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < pred.n(); ++n)
    for (std::size_t c = 0; c < pred.c(); ++c)
      for (std::size_t h = 0; h < pred.h(); ++h)
        for (std::size_t w = 0; w < pred.w(); ++w) {
          if (!masked_at(mask, n, c, h, w)) continue;
          acc += pow_p(std::abs(static_cast<double>(pred(n, c, h, w)) -
                                static_cast<double>(gt(n, c, h, w))),
                       p);
          ++count;
        }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

template <typename T>
Tensor<T> masked_lp_loss_grad(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask,
                              int p) {
  check_same(pred, gt, "masked_lp_loss");
  check_mask(pred, mask);
  Tensor<T> out(pred.shape());
  std::size_t count = 0;
  for (std::size_t n = 0; n < pred.n(); ++n)
    for (std::size_t c = 0; c < pred.c(); ++c)
      for (std::size_t h = 0; h < pred.h(); ++h)
        for (std::size_t w = 0; w < pred.w(); ++w) {
          if (!masked_at(mask, n, c, h, w)) continue;
          const double d =
              static_cast<double>(pred(n, c, h, w)) - static_cast<double>(gt(n, c, h, w));
          out(n, c, h, w) = static_cast<T>(p == 1 ? sign(d) : 2.0 * d);
          ++count;
        }
  if (count > 0) {
    for (auto& v : out.data()) v = static_cast<T>(v / static_cast<double>(count));
  }
  return out;
}

std::vector<LossAnalysisRow> loss_analysis_emit(const std::vector<double>& alphas, int p,
                                                std::size_t sample_count, double x_max) {
  if (p != 1 && p != 2) throw ConfigError("loss norm order p must be 1 or 2");
  if (sample_count < 2) throw ConfigError("loss analysis needs at least 2 samples");
  if (!(x_max > 0.0)) throw ConfigError("loss analysis range must be positive");
  for (double a : alphas) {
    if (!(a > 0.0)) throw ConfigError("loss analysis alphas must be positive");
  }
  std::vector<double> curves = alphas;
  curves.push_back(std::numeric_limits<double>::infinity());

  const double dx = x_max / static_cast<double>(sample_count - 1);
  std::vector<LossAnalysisRow> rows;
  rows.reserve(curves.size() * sample_count);
  for (double alpha : curves) {
    const std::size_t first = rows.size();
    for (std::size_t i = 0; i < sample_count; ++i) {
      LossAnalysisRow r;
      r.x = dx * static_cast<double>(i);
      r.alpha = alpha;
      r.weight = std::isinf(alpha) ? 1.0 : 1.0 - std::exp(-alpha * pow_p(r.x, p));
      r.loss = pow_p(r.x, p) * r.weight;
      r.density = r.loss * 0.5 * std::exp(-r.x);
      rows.push_back(r);
    }
    double area = 0.0;
    rows[first].cumulative = 0.0;
    for (std::size_t i = first + 1; i < rows.size(); ++i) {
      area += 0.5 * (rows[i - 1].density + rows[i].density) * dx;
      rows[i].cumulative = area;
    }
    for (std::size_t i = first; i < rows.size(); ++i) {
      rows[i].density /= area;
      rows[i].cumulative /= area;
    }
    rows.back().cumulative = 1.0;
  }
  return rows;
}

void write_loss_analysis_csv(std::ostream& out, const std::vector<LossAnalysisRow>& rows) {
  out << "x,alpha,weight,loss,density,cumulative\n";
  const auto old = out.precision(10);
  for (const auto& r : rows) {
    out << r.x << ',';
    if (std::isinf(r.alpha)) out << "inf";
    else out << r.alpha;
    out << ',' << r.weight << ',' << r.loss << ',' << r.density << ',' << r.cumulative << '\n';
  }
  out.precision(old);
}

#define SYE_INSTANTIATE(T)                                                                       \
  template DiffStats<T> diff_stats(const Tensor<T>&, const Tensor<T>&, int);                     \
  template std::vector<ResidualStats> loss_stats(const Tensor<T>&, const Tensor<T>&,             \
                                                 const LossParams&);                             \
  template double oa_loss(const Tensor<T>&, const Tensor<T>&, const LossParams&);                \
  template double oa_loss_with_stats(const Tensor<T>&, const Tensor<T>&, const LossParams&,      \
                                     const std::vector<ResidualStats>&);                         \
  template Tensor<T> oa_loss_grad(const Tensor<T>&, const Tensor<T>&, const LossParams&);        \
  template double lp_loss(const Tensor<T>&, const Tensor<T>&, int);                              \
  template Tensor<T> lp_loss_grad(const Tensor<T>&, const Tensor<T>&, int);                      \
  template double masked_lp_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);     \
  template Tensor<T> masked_lp_loss_grad(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                         int);

SYE_INSTANTIATE(float)
SYE_INSTANTIATE(double)

#undef SYE_INSTANTIATE

}  // namespace sye
