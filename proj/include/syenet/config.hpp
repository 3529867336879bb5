// SPDX-License-Identifier: Apache-2.0
//
// Plain-text key=value model configuration. '#' starts a comment line.
//
// required: task width fusion branch_menu alpha p ca_reduction seed
// optional: scale expansion precision head_prelu global_skip loss lr lr_floor
//           batch patch train_count val_count val_every warmup_lr
//
// branch_menu is a comma list of K, K+bn, <k>, <k>+bn where K is the block's own kernel.
#pragma once

#include <cstdint>
#include <string>

#include "syenet/loss.hpp"
#include "syenet/network.hpp"
#include "syenet/train.hpp"

namespace sye {

struct ToySettings {
  LossKind loss = LossKind::oa;
  double lr = 3e-3;
  double lr_floor = 1e-5;
  std::size_t batch = 4;
  std::size_t patch = 32;
  std::size_t train_count = 256;
  std::size_t val_count = 16;
  std::size_t val_every = 250;
  double warmup_lr = 1e-6;

  bool operator==(const ToySettings&) const = default;
};

struct ModelConfigFile {
  SyeNetConfig net;
  LossParams loss;
  std::uint64_t seed = 0;
  ToySettings toy;

  bool operator==(const ModelConfigFile& o) const;
};

ModelConfigFile parse_config(const std::string& text);
/// Canonical form: every key, fixed order, shortest round-trip numbers.
std::string emit_config(const ModelConfigFile& config);
ModelConfigFile load_config(const std::string& path);

std::string menu_to_string(const std::vector<BranchChoice>& menu);
std::vector<BranchChoice> parse_menu(const std::string& text);

}  // namespace sye
