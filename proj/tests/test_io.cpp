// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "syenet/config.hpp"
#include "syenet/image_io.hpp"
#include "syenet/weights.hpp"

using namespace sye;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "syenet_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<double> flat(const SyeNet<float>& m) {
  std::vector<double> out;
  visit_parameters(m, [&](const std::string&, const Tensor<float>& t, ParamKind) {
    for (float v : t.data()) out.push_back(v);
  });
  return out;
}

}  // namespace

TEST(Png, EightBitScaling) {
  Tensor<double> img(Shape{1, 1, 1, 3}, std::vector<double>{1.0, 0.0, 128.0 / 255.0});
  const auto path = scratch("gray8.png").string();
  save_png(path, img, 8);
  const auto back = load_png<double>(path);
  EXPECT_EQ(back.bit_depth, 8);
  ASSERT_EQ(back.pixels.shape(), (Shape{1, 1, 1, 3}));
  EXPECT_EQ(back.pixels[0], 1.0);
  EXPECT_EQ(back.pixels[1], 0.0);
  EXPECT_NEAR(back.pixels[2], 0.50196, 1e-5);
  EXPECT_EQ(back.pixels[2], 128.0 / 255.0);
}

TEST(Png, RoundHalfUpAndClamp) {
  Tensor<double> img(Shape{1, 1, 1, 4}, std::vector<double>{0.5 / 255.0, 0.49 / 255.0, -0.3, 1.7});
  const auto path = scratch("clamp.png").string();
  save_png(path, img, 8);
  const auto back = load_png<double>(path);
  EXPECT_EQ(back.pixels[0], 1.0 / 255.0);
  EXPECT_EQ(back.pixels[1], 0.0);
  EXPECT_EQ(back.pixels[2], 0.0);
  EXPECT_EQ(back.pixels[3], 1.0);
}

TEST(Png, QuantizedRoundTripBitExact) {
  Rng rng(4);
  for (int bits : {8, 16}) {
    const double q = std::pow(2.0, bits) - 1;
    Tensor<float> img(Shape{1, 3, 7, 9});
    for (auto& v : img.data()) v = static_cast<float>(std::floor(rng.uniform() * (q + 1)) / q);
    const auto path = scratch("rgb" + std::to_string(bits) + ".png").string();
    save_png(path, img, bits);
    const auto back = load_png<float>(path);
    EXPECT_EQ(back.bit_depth, bits);
    EXPECT_EQ(back.pixels, img);
    save_png(path, back.pixels, bits);
    EXPECT_EQ(load_png<float>(path).pixels, img);
  }
}

TEST(Png, Errors) {
  EXPECT_THROW(load_png<float>(scratch("missing.png").string()), IoError);
  const auto junk = scratch("junk.png").string();
  const std::vector<std::uint8_t> bytes{'n', 'o', 't', 'p', 'n', 'g', 0, 1, 2, 3};
  write_file(junk, bytes);
  EXPECT_THROW(load_png<float>(junk), Error);
  EXPECT_THROW(save_png(scratch("x.png").string(), Tensor<float>(Shape{1, 2, 2, 2}), 8), Error);
  EXPECT_THROW(save_png(scratch("x.png").string(), Tensor<float>(Shape{1, 1, 2, 2}), 12), Error);
}

TEST(Bayer, PackConvention) {
  Tensor<float> raw(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const auto p = bayer_pack(raw);
  ASSERT_EQ(p.shape(), (Shape{1, 4, 1, 1}));
  EXPECT_EQ(p, Tensor<float>(Shape{1, 4, 1, 1}, std::vector<float>{1, 2, 3, 4}));
}

TEST(Bayer, RoundTripAndShape) {
  Rng rng(5);
  Tensor<float> raw(Shape{1, 1, 256, 256});
  rng.fill_uniform(raw, 0, 1);
  const auto p = bayer_pack(raw);
  EXPECT_EQ(p.shape(), (Shape{1, 4, 128, 128}));
  EXPECT_EQ(p(0, 3, 5, 7), raw(0, 0, 11, 15));
  EXPECT_EQ(p(0, 2, 5, 7), raw(0, 0, 11, 14));
  EXPECT_EQ(bayer_unpack(p), raw);
}

TEST(Bayer, Errors) {
  EXPECT_THROW(bayer_pack(Tensor<float>(Shape{1, 1, 3, 4})), ShapeError);
  EXPECT_THROW(bayer_pack(Tensor<float>(Shape{1, 3, 4, 4})), ShapeError);
  EXPECT_THROW(bayer_unpack(Tensor<float>(Shape{1, 3, 2, 2})), ShapeError);
}

TEST(Weights, ByteIdenticalRoundTrip) {
  SyeNetConfig cfg;
  const auto m = build_model<float>(cfg, 3);
  const auto bytes = serialize_weights(m);
  const auto back = deserialize_weights<float>(bytes, cfg);
  EXPECT_EQ(serialize_weights(back), bytes);
  EXPECT_EQ(flat(back), flat(m));

  const auto folded = fold_model(m);
  const auto path = scratch("folded.syw").string();
  save_weights(path, folded);
  const auto loaded = load_weights<float>(path, cfg);
  EXPECT_EQ(loaded.mode, Mode::folded);
  EXPECT_EQ(serialize_weights(loaded), read_file(path));

  const auto hdr = parse_weights_header(bytes);
  EXPECT_EQ(hdr.mode, Mode::training);
  EXPECT_EQ(hdr.width, 8u);
  EXPECT_EQ(hdr.precision, Precision::f32);
}

TEST(Weights, PrecisionConversion) {
  SyeNetConfig cfg;
  cfg.precision = Precision::f64;
  const auto m = build_model<double>(cfg, 4);
  const auto bytes = serialize_weights(m);
  const auto as_float = deserialize_weights<float>(bytes, cfg);
  const auto as_double = deserialize_weights<double>(bytes, cfg);
  EXPECT_EQ(serialize_weights(as_double), bytes);
  EXPECT_EQ(as_float.mode, Mode::training);
}

TEST(Weights, CorruptionRejected) {
  SyeNetConfig cfg;
  const auto bytes = serialize_weights(build_model<float>(cfg, 5));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(deserialize_weights<float>(truncated, cfg), FormatError);
  auto header_only = bytes;
  header_only.resize(10);
  EXPECT_THROW(deserialize_weights<float>(header_only, cfg), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_weights<float>(trailing, cfg), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_weights<float>(magic, cfg), FormatError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(deserialize_weights<float>(version, cfg), FormatError);
  EXPECT_THROW(deserialize_weights<float>(std::span<const std::uint8_t>{}, cfg), FormatError);
}

TEST(Weights, ConfigMismatchRejected) {
  SyeNetConfig cfg;
  const auto bytes = serialize_weights(build_model<float>(cfg, 6));
  auto wide = cfg;
  wide.width = 12;
  EXPECT_THROW(deserialize_weights<float>(bytes, wide), Error);
  auto add = cfg;
  add.fusion = Fusion::add;
  EXPECT_THROW(deserialize_weights<float>(bytes, add), Error);
  auto x3 = cfg;
  x3.scale = 3;
  EXPECT_THROW(deserialize_weights<float>(bytes, x3), Error);
  auto lle = cfg;
  lle.task = Task::lle;
  EXPECT_THROW(deserialize_weights<float>(bytes, lle), Error);
  EXPECT_THROW(load_weights<float>(scratch("nope.syw").string(), cfg), IoError);
}

TEST(Config, ParseEmitParseIdentity) {
  ModelConfigFile c;
  c.net.task = Task::sr;
  c.net.scale = 3;
  c.net.width = 12;
  c.net.fusion = Fusion::mul;
  c.net.branch_menu = parse_menu("K+bn,1,3+bn");
  c.net.head_prelu = true;
  c.loss.alpha = 0.1;
  c.loss.p = 2;
  c.seed = 17;
  c.toy.lr = 1.25e-3;
  const auto text = emit_config(c);
  const auto back = parse_config(text);
  EXPECT_TRUE(back == c);
  EXPECT_EQ(emit_config(back), text);
}

TEST(Config, MinimalFileUsesDefaults) {
  const std::string text =
      "# minimal\n"
      "task=sr\nwidth=8\nfusion=qcu\nbranch_menu=K,K+bn,1,1+bn\nalpha=1\np=1\nca_reduction=2\nseed=0\n";
  const auto c = parse_config(text);
  EXPECT_EQ(c.net.scale, 2u);
  EXPECT_EQ(c.net.fusion, Fusion::qcu);
  EXPECT_EQ(c.net.branch_menu.size(), 4u);
  EXPECT_EQ(c.toy, ToySettings{});
  EXPECT_TRUE(parse_config(emit_config(c)) == c);
}

TEST(Config, Rejections) {
  const std::string base =
      "task=sr\nwidth=8\nfusion=qcu\nbranch_menu=K,1\nalpha=1\np=1\nca_reduction=2\nseed=0\n";
  EXPECT_NO_THROW(parse_config(base));
  EXPECT_THROW(parse_config(base + "colour=red\n"), ConfigError);
  EXPECT_THROW(parse_config(base + "width=8\n"), ConfigError);
  EXPECT_THROW(parse_config("task=sr\nwidth=8\n"), ConfigError);
  EXPECT_THROW(parse_config(base + "no equals sign\n"), ConfigError);
  EXPECT_THROW(parse_config("task=xyz\nwidth=8\nfusion=qcu\nbranch_menu=K\nalpha=1\np=1\nca_reduction=2\nseed=0\n"),
               ConfigError);
  EXPECT_THROW(parse_config("task=sr\nwidth=eight\nfusion=qcu\nbranch_menu=K\nalpha=1\np=1\nca_reduction=2\nseed=0\n"),
               ConfigError);
  EXPECT_THROW(parse_config("task=sr\nwidth=8\nfusion=qcu\nbranch_menu=K\nalpha=1\np=3\nca_reduction=2\nseed=0\n"),
               ConfigError);
  EXPECT_THROW(load_config(scratch("absent.cfg").string()), IoError);
}

TEST(Config, Menu) {
  const auto m = parse_menu("K, K+bn ,5+bn,1");
  ASSERT_EQ(m.size(), 4u);
  EXPECT_EQ(m[0].kernel, 0u);
  EXPECT_FALSE(m[0].with_bn);
  EXPECT_TRUE(m[1].with_bn);
  EXPECT_EQ(m[2].kernel, 5u);
  EXPECT_TRUE(m[2].with_bn);
  EXPECT_EQ(menu_to_string(m), "K,K+bn,5+bn,1");
  EXPECT_THROW(parse_menu(""), ConfigError);
  EXPECT_THROW(parse_menu("4"), ConfigError);
  EXPECT_THROW(parse_menu("K+ln"), ConfigError);
}
