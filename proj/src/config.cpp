// SPDX-License-Identifier: Apache-2.0
#include "syenet/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sye {

bool ModelConfigFile::operator==(const ModelConfigFile& o) const {
  return net == o.net && loss.alpha == o.loss.alpha && loss.p == o.loss.p &&
         loss.per_image == o.loss.per_image && seed == o.seed && toy == o.toy;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

Task to_task(const std::string& v) {
  if (v == "sr") return Task::sr;
  if (v == "isp") return Task::isp;
  if (v == "lle") return Task::lle;
  throw ConfigError("unknown task '" + v + "' (sr, isp, lle)");
}

Fusion to_fusion(const std::string& v) {
  if (v == "qcu") return Fusion::qcu;
  if (v == "add") return Fusion::add;
  if (v == "mul") return Fusion::mul;
  if (v == "cat_conv") return Fusion::cat_conv;
  throw ConfigError("unknown fusion '" + v + "' (qcu, add, mul, cat_conv)");
}

Precision to_precision(const std::string& v) {
  if (v == "f32") return Precision::f32;
  if (v == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + v + "' (f32, f64)");
}

LossKind to_loss(const std::string& v) {
  if (v == "oa") return LossKind::oa;
  if (v == "l1") return LossKind::l1;
  throw ConfigError("unknown loss '" + v + "' (oa, l1)");
}

const std::set<std::string> kRequired = {"task", "width", "fusion", "branch_menu",
                                         "alpha", "p", "ca_reduction", "seed"};

}  // namespace

std::string menu_to_string(const std::vector<BranchChoice>& menu) {
  std::string out;
  for (const auto& b : menu) {
    if (!out.empty()) out += ',';
    out += b.kernel == 0 ? "K" : std::to_string(b.kernel);
    if (b.with_bn) out += "+bn";
  }
  return out;
}

std::vector<BranchChoice> parse_menu(const std::string& text) {
  std::vector<BranchChoice> menu;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    BranchChoice b;
    const std::string suffix = "+bn";
    if (item.size() > suffix.size() && item.compare(item.size() - suffix.size(), suffix.size(), suffix) == 0) {
      b.with_bn = true;
      item = item.substr(0, item.size() - suffix.size());
    }
    if (item == "K") {
      b.kernel = 0;
    } else {
      b.kernel = to_uint("branch_menu", item);
      if (b.kernel == 0 || b.kernel % 2 == 0) throw ConfigError("branch kernel '" + item + "' must be odd");
    }
    menu.push_back(b);
  }
  if (menu.empty()) throw ConfigError("branch_menu is empty");
  return menu;
}

ModelConfigFile parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kv.emplace(key, value).second) throw ConfigError("config key '" + key + "' given twice");
  }
  for (const auto& k : kRequired) {
    if (!kv.count(k)) throw ConfigError("config is missing required key '" + k + "'");
  }

  ModelConfigFile c;
  for (const auto& [key, v] : kv) {
    if (key == "task") c.net.task = to_task(v);
    else if (key == "scale") c.net.scale = to_uint(key, v);
    else if (key == "width") c.net.width = to_uint(key, v);
    else if (key == "fusion") c.net.fusion = to_fusion(v);
    else if (key == "branch_menu") c.net.branch_menu = parse_menu(v);
    else if (key == "expansion") c.net.expansion = to_uint(key, v);
    else if (key == "ca_reduction") c.net.ca_reduction = to_uint(key, v);
    else if (key == "precision") c.net.precision = to_precision(v);
    else if (key == "head_prelu") c.net.head_prelu = to_bool(key, v);
    else if (key == "global_skip") c.net.global_skip = to_bool(key, v);
    else if (key == "alpha") c.loss.alpha = to_double(key, v);
    else if (key == "p") c.loss.p = static_cast<int>(to_uint(key, v));
    else if (key == "seed") c.seed = to_uint(key, v);
    else if (key == "loss") c.toy.loss = to_loss(v);
    else if (key == "lr") c.toy.lr = to_double(key, v);
    else if (key == "lr_floor") c.toy.lr_floor = to_double(key, v);
    else if (key == "batch") c.toy.batch = to_uint(key, v);
    else if (key == "patch") c.toy.patch = to_uint(key, v);
    else if (key == "train_count") c.toy.train_count = to_uint(key, v);
    else if (key == "val_count") c.toy.val_count = to_uint(key, v);
    else if (key == "val_every") c.toy.val_every = to_uint(key, v);
    else if (key == "warmup_lr") c.toy.warmup_lr = to_double(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.net.validate();
  c.loss.validate();
  return c;
}

std::string emit_config(const ModelConfigFile& c) {
  std::ostringstream o;
  o << "task=" << to_string(c.net.task) << '\n'
    << "scale=" << c.net.scale << '\n'
    << "width=" << c.net.width << '\n'
    << "fusion=" << to_string(c.net.fusion) << '\n'
    << "branch_menu=" << menu_to_string(c.net.branch_menu) << '\n'
    << "expansion=" << c.net.expansion << '\n'
    << "ca_reduction=" << c.net.ca_reduction << '\n'
    << "precision=" << to_string(c.net.precision) << '\n'
    << "head_prelu=" << (c.net.head_prelu ? "true" : "false") << '\n'
    << "global_skip=" << (c.net.global_skip ? "true" : "false") << '\n'
    << "alpha=" << fmt(c.loss.alpha) << '\n'
    << "p=" << c.loss.p << '\n'
    << "seed=" << c.seed << '\n'
    << "loss=" << (c.toy.loss == LossKind::oa ? "oa" : "l1") << '\n'
    << "lr=" << fmt(c.toy.lr) << '\n'
    << "lr_floor=" << fmt(c.toy.lr_floor) << '\n'
    << "batch=" << c.toy.batch << '\n'
    << "patch=" << c.toy.patch << '\n'
    << "train_count=" << c.toy.train_count << '\n'
    << "val_count=" << c.toy.val_count << '\n'
    << "val_every=" << c.toy.val_every << '\n'
    << "warmup_lr=" << fmt(c.toy.warmup_lr) << '\n';
  return o.str();
}

ModelConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace sye
