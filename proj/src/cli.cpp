// SPDX-License-Identifier: Apache-2.0
#include "syenet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "syenet/autograd.hpp"
#include "syenet/config.hpp"
#include "syenet/image_io.hpp"
#include "syenet/metrics.hpp"
#include "syenet/train.hpp"
#include "syenet/weights.hpp"

namespace sye::cli {

namespace {

struct InferArgs {
  std::string config, weights, input, output, mode;
};
struct ReparamArgs {
  std::string config, weights, output;
  std::size_t trials = 10;
};
struct VerifyArgs {
  std::string config, train, folded;
  std::size_t trials = 10;
  double tol = 1e-4;
};
struct TrainArgs {
  std::string config, out, log, init;
  std::size_t iters = 2000;
  std::optional<std::uint64_t> seed;
  std::size_t warmup = 0;
};
struct ScoreArgs {
  double psnr = 0.0, latency = 0.0, c_norm = 0.0;
};
struct AnalyzeArgs {
  std::string alphas, out;
  int p = 1;
  std::size_t samples = 1001;
};
struct GradArgs {
  std::string config;
  std::uint64_t seed = 0;
  double tol = 1e-4;
  std::size_t coords = 20;
};

// Calls f.template operator()<T>() with T matching the config precision.
template <typename F>
int with_precision(Precision p, F&& f) {
  if (p == Precision::f64) return f.template operator()<double>();
  return f.template operator()<float>();
}

double default_tol(Precision p) { return p == Precision::f64 ? 1e-9 : 1e-4; }

std::size_t side_for(const SyeNetConfig& cfg) { return cfg.task == Task::isp ? 16 : 12; }

int do_infer(const InferArgs& a, std::ostream& out) {
  const auto cfg = load_config(a.config);
  return with_precision(cfg.net.precision, [&]<typename T>() {
    SyeNet<T> model = load_weights<T>(a.weights, cfg.net);
    if (a.mode == "folded") {
      model = fold_model(model);
    } else if (a.mode == "training" && model.mode == Mode::folded) {
      throw ModeError("weights are folded; training-mode inference needs a training file");
    }
    const auto img = load_png<T>(a.input);
    const Tensor<T> y = forward(model, img.pixels);
    save_png(a.output, y, img.bit_depth);
    out << "wrote " << a.output << " " << y.h() << "x" << y.w() << " (" << to_string(model.mode) << ")\n";
    return kExitOk;
  });
}

int do_reparam(const ReparamArgs& a, std::ostream& out) {
  const auto cfg = load_config(a.config);
  return with_precision(cfg.net.precision, [&]<typename T>() {
    const SyeNet<T> model = load_weights<T>(a.weights, cfg.net);
    if (model.mode != Mode::training) throw ModeError("reparam needs training-mode weights");
    const SyeNet<T> folded = fold_model(model);
    const auto rep = verify_model_equivalence(model, folded, a.trials, default_tol(cfg.net.precision),
                                              cfg.seed, side_for(cfg.net));
    out << std::setprecision(6) << "max_abs_diff " << rep.max_abs_diff << " tolerance " << rep.tolerance << '\n';
    if (!rep.pass) return kExitFailure;
    save_weights(a.output, folded);
    out << "wrote " << a.output << " params " << param_count(folded, true) << '\n';
    return kExitOk;
  });
}

int do_verify(const VerifyArgs& a, std::ostream& out) {
  const auto cfg = load_config(a.config);
  return with_precision(cfg.net.precision, [&]<typename T>() {
    const SyeNet<T> ref = load_weights<T>(a.train, cfg.net);
    const SyeNet<T> cand = load_weights<T>(a.folded, cfg.net);
    if (ref.mode != Mode::training) throw ModeError(a.train + " is not a training-mode file");
    if (cand.mode != Mode::folded) throw ModeError(a.folded + " is not a folded file");
    const auto rep = verify_model_equivalence(ref, cand, a.trials, a.tol, cfg.seed, side_for(cfg.net));
    out << std::setprecision(6) << "max_abs_diff " << rep.max_abs_diff << " tolerance " << rep.tolerance
        << (rep.pass ? " PASS" : " FAIL") << '\n';
    return rep.pass ? kExitOk : kExitFailure;
  });
}

int do_train(const TrainArgs& a, std::ostream& out) {
  const auto cfg = load_config(a.config);
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  return with_precision(cfg.net.precision, [&]<typename T>() {
    SyeNet<T> model = a.init.empty() ? build_model<T>(cfg.net, seed) : load_weights<T>(a.init, cfg.net);
    if (model.mode != Mode::training) throw ModeError("cannot train from folded weights " + a.init);

    DatasetSpec tr;
    tr.task = cfg.net.task;
    tr.scale = cfg.net.scale;
    tr.count = cfg.toy.train_count;
    tr.patch = cfg.toy.patch;
    tr.seed = seed * 2 + 1;
    DatasetSpec va = tr;
    va.count = cfg.toy.val_count;
    va.patch = 2 * cfg.toy.patch;
    va.seed = seed * 2 + 2;
    const auto train = make_synthetic_dataset<T>(tr);
    const auto val = make_synthetic_dataset<T>(va);

    TrainConfig tc;
    tc.iterations = a.iters;
    tc.batch = cfg.toy.batch;
    tc.lr = cfg.toy.lr;
    tc.lr_floor = cfg.toy.lr_floor;
    tc.loss = cfg.toy.loss;
    tc.loss_params = cfg.loss;
    tc.val_every = cfg.toy.val_every;
    tc.seed = seed;
    tc.warmup_iters = a.warmup;
    tc.warmup_lr = cfg.toy.warmup_lr;
    tc.mask.seed = seed;

    const auto res = train_toy(std::move(model), train, val, tc);
    save_weights(a.out, res.model);
    if (!a.log.empty()) {
      std::ofstream log(a.log);
      if (!log) throw IoError("cannot write " + a.log);
      write_train_log_csv(log, res.log);
    }
    out << std::fixed << std::setprecision(4);
    if (a.warmup > 0) out << "warmup objective " << res.warmup_before << " -> " << res.warmup_after << '\n';
    if (!res.log.empty()) out << "loss " << res.log.front().loss << " -> " << res.log.back().loss << '\n';
    out << "val_psnr " << res.val_psnr;
    if (cfg.net.task == Task::sr) out << " bicubic " << bicubic_psnr(val);
    out << '\n' << "wrote " << a.out << '\n';
    return kExitOk;
  });
}

int do_score(const ScoreArgs& a, std::ostream& out) {
  const double s = mai_score(a.psnr, ScoreParams{a.c_norm, a.latency});
  out << std::setprecision(6) << s << '\n';
  return kExitOk;
}

int do_analyze(const AnalyzeArgs& a, std::ostream& out) {
  std::vector<double> alphas;
  std::stringstream ss(a.alphas);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      alphas.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad alpha '" + item + "'");
    }
  }
  if (alphas.empty()) throw ConfigError("--alphas is empty");
  const auto rows = loss_analysis_emit(alphas, a.p, a.samples);
  std::ofstream csv(a.out);
  if (!csv) throw IoError("cannot write " + a.out);
  write_loss_analysis_csv(csv, rows);
  out << "wrote " << rows.size() << " rows to " << a.out << '\n';
  return kExitOk;
}

int do_grad(const GradArgs& a, std::ostream& out) {
  const auto cfg = load_config(a.config);
  ModelGradCheckOptions opt;
  opt.tol = a.tol;
  opt.min_coords = a.coords;
  const auto rep = check_model_gradients(cfg.net, a.seed, opt);
  out << std::setprecision(4) << "coordinates " << rep.entries.size() << " max_rel_error " << rep.max_rel_error
      << " (" << rep.worst << ") tolerance " << rep.tolerance << (rep.pass ? " PASS" : " FAIL") << '\n';
  return rep.pass ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SYENet toolkit: inference, folding, verification, toy training and loss analysis", "syenet"};
  app.require_subcommand(1);

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Run a model on a PNG image");
  infer->add_option("--config", ia.config)->required();
  infer->add_option("--weights", ia.weights)->required();
  infer->add_option("--input", ia.input)->required();
  infer->add_option("--output", ia.output)->required();
  infer->add_option("--mode", ia.mode)->check(CLI::IsMember({"folded", "training"}));

  ReparamArgs ra;
  auto* reparam = app.add_subcommand("reparam", "Fold training weights into single convolutions");
  reparam->add_option("--config", ra.config)->required();
  reparam->add_option("--weights", ra.weights)->required();
  reparam->add_option("--output", ra.output)->required();
  reparam->add_option("--trials", ra.trials)->check(CLI::PositiveNumber);

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Compare a training file against a folded file");
  verify->add_option("--config", va.config)->required();
  verify->add_option("--weights-train", va.train)->required();
  verify->add_option("--weights-folded", va.folded)->required();
  verify->add_option("--trials", va.trials)->check(CLI::PositiveNumber);
  verify->add_option("--tol", va.tol)->check(CLI::NonNegativeNumber);

  TrainArgs ta;
  auto* train = app.add_subcommand("train-toy", "Train on synthetic data");
  train->add_option("--config", ta.config)->required();
  train->add_option("--iters", ta.iters);
  train->add_option("--seed", ta.seed);
  train->add_option("--out", ta.out)->required();
  train->add_option("--log", ta.log);
  train->add_option("--warmup-iters", ta.warmup);
  train->add_option("--init", ta.init, "Start from training-mode weights");

  ScoreArgs sa;
  auto* score = app.add_subcommand("score", "2^(2 PSNR) / (C * latency)");
  score->add_option("--psnr", sa.psnr)->required();
  score->add_option("--latency-ms", sa.latency)->required();
  score->add_option("--c-norm", sa.c_norm)->required();

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze-loss", "Tabulate the outlier-aware loss under a unit Laplacian");
  analyze->add_option("--alphas", aa.alphas)->required();
  analyze->add_option("--p", aa.p)->check(CLI::IsMember({1, 2}));
  analyze->add_option("--out", aa.out)->required();
  analyze->add_option("--samples", aa.samples)->check(CLI::Range(2, 10000000));

  GradArgs ga;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of the full model in f64");
  grad->add_option("--config", ga.config)->required();
  grad->add_option("--seed", ga.seed);
  grad->add_option("--tol", ga.tol)->check(CLI::PositiveNumber);
  grad->add_option("--coords", ga.coords)->check(CLI::PositiveNumber);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (infer->parsed()) return do_infer(ia, out);
    if (reparam->parsed()) return do_reparam(ra, out);
    if (verify->parsed()) return do_verify(va, out);
    if (train->parsed()) return do_train(ta, out);
    if (score->parsed()) return do_score(sa, out);
    if (analyze->parsed()) return do_analyze(aa, out);
    if (grad->parsed()) return do_grad(ga, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace sye::cli
