// SPDX-License-Identifier: Apache-2.0
#include "syenet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace sye {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  // unwinds back to the setjmp in the caller
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

template <typename T>
PngImage<T> load_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path + " is not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_byte> data;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int depth = 0, color = 0;
  std::size_t rowbytes = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": " + (err.empty() ? "corrupt PNG" : err));
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  color = png_get_color_type(png, info);
  const bool supported = (depth == 8 || depth == 16) && (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_RGB);
  if (!supported) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": only 8/16-bit grayscale or RGB PNG is supported (color type " +
                      std::to_string(color) + ", depth " + std::to_string(depth) + ")");
  }
  rowbytes = png_get_rowbytes(png, info);
  data.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = data.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const double maxv = depth == 16 ? 65535.0 : 255.0;
  PngImage<T> img{Tensor<T>(Shape{1, channels, height, width}), depth};
  for (std::size_t y = 0; y < height; ++y) {
    const png_byte* row = rows[y];
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t i = x * channels + c;
        // 16-bit samples are big-endian on disk
        const unsigned v = depth == 16 ? (unsigned{row[2 * i]} << 8) | row[2 * i + 1] : row[i];
        img.pixels(0, c, y, x) = static_cast<T>(static_cast<double>(v) / maxv);
      }
    }
  }
  return img;
}

template <typename T>
void save_png(const std::string& path, const Tensor<T>& image, int bit_depth) {
  if (image.n() != 1 || (image.c() != 1 && image.c() != 3)) {
    throw ShapeError("save_png: expected 1 x {1,3} x H x W, got " + to_string(image.shape()));
  }
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("save_png: bit depth must be 8 or 16");
  const std::size_t channels = image.c();
  const std::size_t bytes = bit_depth == 16 ? 2 : 1;
  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t rowbytes = image.w() * channels * bytes;
  std::vector<png_byte> data(rowbytes * image.h());
  for (std::size_t y = 0; y < image.h(); ++y)
    for (std::size_t x = 0; x < image.w(); ++x)
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = std::clamp(static_cast<double>(image(0, c, y, x)), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::floor(v * maxv + 0.5));
        png_byte* dst = data.data() + y * rowbytes + (x * channels + c) * bytes;
        if (bytes == 2) {
          dst[0] = static_cast<png_byte>(q >> 8);
          dst[1] = static_cast<png_byte>(q & 0xff);
        } else {
          dst[0] = static_cast<png_byte>(q);
        }
      }

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path);
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(image.h());
  for (std::size_t y = 0; y < image.h(); ++y) rows[y] = data.data() + y * rowbytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path + ": " + (err.empty() ? "PNG write failed" : err));
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.w()), static_cast<png_uint_32>(image.h()),
               bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

template <typename T>
Tensor<T> bayer_pack(const Tensor<T>& raw) {
  if (raw.c() != 1) throw ShapeError("bayer_pack: raw mosaic must have one channel");
  if (raw.h() % 2 != 0 || raw.w() % 2 != 0) {
    throw ShapeError("bayer_pack: mosaic " + to_string(raw.shape()) + " has odd dimensions");
  }
  return pixel_unshuffle(raw, 2);
}

template <typename T>
Tensor<T> bayer_unpack(const Tensor<T>& packed) {
  if (packed.c() != 4) throw ShapeError("bayer_unpack: expected 4 packed channels");
  return pixel_shuffle(packed, 2);
}

template PngImage<float> load_png(const std::string&);
template PngImage<double> load_png(const std::string&);
template void save_png(const std::string&, const Tensor<float>&, int);
template void save_png(const std::string&, const Tensor<double>&, int);
template Tensor<float> bayer_pack(const Tensor<float>&);
template Tensor<double> bayer_pack(const Tensor<double>&);
template Tensor<float> bayer_unpack(const Tensor<float>&);
template Tensor<double> bayer_unpack(const Tensor<double>&);

}  // namespace sye
