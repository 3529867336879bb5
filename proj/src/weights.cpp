// SPDX-License-Identifier: Apache-2.0
#include "syenet/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sye {

namespace {

constexpr char kMagic[4] = {'S', 'Y', 'W', '1'};

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

template <typename T>
constexpr Dtype dtype_of() {
  return sizeof(T) == 4 ? Dtype::f32 : Dtype::f64;
}

std::size_t dtype_size(Dtype d) { return d == Dtype::f32 ? 4 : 8; }

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(U{b_[pos_ + i]} << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("weights file truncated at byte " + std::to_string(pos_));
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_value(Writer& w, T v) {
  if constexpr (sizeof(T) == 4) w.le(std::bit_cast<std::uint32_t>(v));
  else w.le(std::bit_cast<std::uint64_t>(v));
}

double get_value(std::span<const std::uint8_t> payload, std::size_t at, Dtype d) {
  std::uint64_t v = 0;
  const std::size_t n = dtype_size(d);
  for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{payload[at + i]} << (8 * i);
  if (d == Dtype::f32) return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(v)));
  return std::bit_cast<double>(v);
}

template <typename E>
E checked_enum(std::uint8_t v, std::uint8_t count, const char* what) {
  if (v >= count) throw FormatError(std::string("weights file: invalid ") + what + " tag " + std::to_string(v));
  return static_cast<E>(v);
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> serialize_weights(const SyeNet<T>& model) {
  struct Entry {
    std::string name;
    const Tensor<T>* t;
  };
  std::vector<Entry> entries;
  visit_parameters(model, [&](const std::string& name, const Tensor<T>& t, ParamKind) {
    entries.push_back({name, &t});
  });

  Writer w;
  w.bytes(kMagic, 4);
  w.le(kWeightsVersion);
  w.le(static_cast<std::uint8_t>(model.mode));
  w.le(static_cast<std::uint8_t>(model.config.task));
  w.le(static_cast<std::uint8_t>(model.config.scale));
  w.le(static_cast<std::uint8_t>(model.config.fusion));
  w.le(static_cast<std::uint8_t>(dtype_of<T>()));
  w.le(std::uint8_t{0});
  w.le(static_cast<std::uint32_t>(model.config.width));
  w.le(static_cast<std::uint32_t>(entries.size()));
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    w.le(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.le(static_cast<std::uint8_t>(dtype_of<T>()));
    w.le(std::uint8_t{4});
    const Shape& s = e.t->shape();
    for (std::size_t d : {s.n, s.c, s.h, s.w}) w.le(static_cast<std::uint32_t>(d));
    w.le(offset);
    offset += e.t->numel() * sizeof(T);
  }
  for (const auto& e : entries) {
    for (T v : e.t->data()) put_value(w, v);
  }
  return std::move(w.data());
}

WeightsHeader parse_weights_header(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw FormatError("not a SYW1 weights file (bad magic)");
  WeightsHeader h;
  h.version = r.le<std::uint16_t>();
  if (h.version != kWeightsVersion) {
    throw FormatError("unsupported weights format version " + std::to_string(h.version));
  }
  h.mode = checked_enum<Mode>(r.le<std::uint8_t>(), 2, "mode");
  h.task = checked_enum<Task>(r.le<std::uint8_t>(), 3, "task");
  h.scale = r.le<std::uint8_t>();
  h.fusion = checked_enum<Fusion>(r.le<std::uint8_t>(), 4, "fusion");
  h.precision = checked_enum<Precision>(r.le<std::uint8_t>(), 2, "precision");
  r.le<std::uint8_t>();
  h.width = r.le<std::uint32_t>();
  return h;
}

template <typename T>
SyeNet<T> deserialize_weights(std::span<const std::uint8_t> bytes, const SyeNetConfig& config) {
  const WeightsHeader h = parse_weights_header(bytes);
  if (h.task != config.task || h.width != config.width || h.fusion != config.fusion ||
      (config.task == Task::sr && h.scale != config.scale)) {
    throw ConfigError("weights file (task " + to_string(h.task) + ", width " + std::to_string(h.width) +
                      ", fusion " + to_string(h.fusion) + ", scale " + std::to_string(h.scale) +
                      ") does not match the config");
  }
  Reader r(bytes);
  r.str(16);
  const std::uint32_t count = r.le<std::uint32_t>();

  SyeNet<T> model = build_model<T>(config, 0);
  if (h.mode == Mode::folded) model = fold_model(model);
  std::vector<std::pair<std::string, Tensor<T>*>> slots;
  visit_parameters(model, [&](const std::string& name, Tensor<T>& t, ParamKind) {
    slots.emplace_back(name, &t);
  });
  if (count != slots.size()) {
    throw ConfigError("weights file holds " + std::to_string(count) + " tensors, the config expects " +
                      std::to_string(slots.size()));
  }

  struct Entry {
    Dtype dtype;
    std::uint64_t offset;
  };
  std::vector<Entry> table;
  std::uint64_t expected = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.le<std::uint16_t>();
    const std::string name = r.str(len);
    const auto dtype = checked_enum<Dtype>(r.le<std::uint8_t>(), 2, "dtype");
    const auto rank = r.le<std::uint8_t>();
    if (rank != 4) throw FormatError("tensor " + name + ": rank " + std::to_string(rank) + ", expected 4");
    Shape s;
    s.n = r.le<std::uint32_t>();
    s.c = r.le<std::uint32_t>();
    s.h = r.le<std::uint32_t>();
    s.w = r.le<std::uint32_t>();
    const auto offset = r.le<std::uint64_t>();
    const auto& [want_name, want] = slots[i];
    if (name != want_name) throw ConfigError("tensor " + std::to_string(i) + " is " + name + ", expected " + want_name);
    if (s != want->shape()) {
      throw ConfigError("tensor " + name + " has dims " + to_string(s) + ", expected " + to_string(want->shape()));
    }
    if (dtype != static_cast<Dtype>(h.precision)) throw FormatError("tensor " + name + ": dtype differs from header");
    if (offset != expected) {
      throw FormatError("tensor " + name + ": offset " + std::to_string(offset) + " breaks contiguous table order");
    }
    expected += s.numel() * dtype_size(dtype);
    table.push_back({dtype, offset});
  }
  const std::size_t payload_start = r.pos();
  const std::size_t have = bytes.size() - payload_start;
  if (have < expected) {
    throw FormatError("weights payload truncated: " + std::to_string(have) + " of " + std::to_string(expected) +
                      " bytes");
  }
  if (have > expected) throw FormatError("weights file has " + std::to_string(have - expected) + " trailing bytes");

  const auto payload = bytes.subspan(payload_start);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Tensor<T>& t = *slots[i].second;
    const std::size_t step = dtype_size(table[i].dtype);
    for (std::size_t j = 0; j < t.numel(); ++j) {
      t[j] = static_cast<T>(get_value(payload, table[i].offset + j * step, table[i].dtype));
    }
  }
  model.config.precision = config.precision;
  return model;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

template <typename T>
void save_weights(const std::string& path, const SyeNet<T>& model) {
  write_file(path, serialize_weights(model));
}

template <typename T>
SyeNet<T> load_weights(const std::string& path, const SyeNetConfig& config) {
  return deserialize_weights<T>(read_file(path), config);
}

#define SYE_INSTANTIATE(T)                                                                       \
  template std::vector<std::uint8_t> serialize_weights(const SyeNet<T>&);                        \
  template SyeNet<T> deserialize_weights(std::span<const std::uint8_t>, const SyeNetConfig&);    \
  template void save_weights(const std::string&, const SyeNet<T>&);                              \
  template SyeNet<T> load_weights(const std::string&, const SyeNetConfig&);

SYE_INSTANTIATE(float)
SYE_INSTANTIATE(double)

#undef SYE_INSTANTIATE

}  // namespace sye
