// SPDX-License-Identifier: Apache-2.0
//
// SYW1 weights files. Little-endian throughout:
//
//   "SYW1"  u16 version  u8 mode  u8 task  u8 scale  u8 fusion  u8 precision  u8 reserved
//   u32 width  u32 tensor_count
//   tensor_count x { u16 name_len, name bytes, u8 dtype, u8 rank, rank x u32 dim, u64 offset }
//   payload: tensors back to back in table order; offsets are relative to the payload start
//
// Every model tensor is stored, BN running statistics included, in visit_parameters order.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "syenet/network.hpp"

namespace sye {

constexpr std::uint16_t kWeightsVersion = 1;

struct WeightsHeader {
  std::uint16_t version = kWeightsVersion;
  Mode mode = Mode::training;
  Task task = Task::sr;
  std::size_t scale = 2;
  Fusion fusion = Fusion::qcu;
  Precision precision = Precision::f32;
  std::size_t width = 0;
};

template <typename T>
std::vector<std::uint8_t> serialize_weights(const SyeNet<T>& model);

/// Parses and checks the file against a model built from `config`: header fields,
/// tensor names and dims must all match. Any inconsistency throws before a model
/// is returned. A file stored at the other precision is converted.
template <typename T>
SyeNet<T> deserialize_weights(std::span<const std::uint8_t> bytes, const SyeNetConfig& config);

WeightsHeader parse_weights_header(std::span<const std::uint8_t> bytes);

template <typename T>
void save_weights(const std::string& path, const SyeNet<T>& model);
template <typename T>
SyeNet<T> load_weights(const std::string& path, const SyeNetConfig& config);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace sye
