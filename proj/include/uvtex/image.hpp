// Copyright 2026 The uvtex Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "uvtex/common.hpp"

namespace uvtex {

/// Interleaved image, row-major, pixel (x, y) at index (y * width + x).
/// Color images carry 3 channels; gradients share the same layout.
template <typename T = double>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 3, T fill = T(0))
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {
    if (width < 0 || height < 0 || channels <= 0)
      throw InputError("image dimensions must be non-negative");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }
  std::size_t size() const { return data_.size(); }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ &&
           channels_ == o.channels_;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 3;
  std::vector<T> data_;
};

/// Binary per-pixel mask stored as 0/1 bytes.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}

  bool operator()(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  std::uint8_t& at(int x, int y) {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b != 0;
    return n;
  }
  Mask inverted() const {
    Mask out(width, height);
    for (std::size_t i = 0; i < bits.size(); ++i) out.bits[i] = bits[i] ? 0 : 1;
    return out;
  }

  friend bool operator==(const Mask&, const Mask&) = default;
};

template <typename T>
void require_same_shape(const Image<T>& a, const Image<T>& b,
                        const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": image dimensions differ (" +
                     std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " +
                     std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
}

template <typename T>
void require_same_dims(const Image<T>& a, const Mask& m, const char* what) {
  if (a.width() != m.width || a.height() != m.height)
    throw ShapeError(std::string(what) + ": image and mask dimensions differ");
}

/// 8-bit encoding used by every PNG this library writes: v -> round(v * 255)
/// after clamping to [0, 1]. Decoding is the exact inverse v = byte / 255.
inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0));
}

template <typename T>
Image<T> quantize_8bit(const Image<T>& img) {
  Image<T> out = img;
  for (auto& v : out.data()) v = static_cast<T>(to_byte(v) / 255.0);
  return out;
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void write_png_bytes(const std::filesystem::path& path, int width,
                            int height, int channels,
                            const std::vector<std::uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw InputError("cannot open for writing: " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("PNG write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or text chunks: output bytes depend only on pixels.
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    auto* row = const_cast<png_bytep>(bytes.data() +
                                      static_cast<std::size_t>(y) * width * channels);
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads any 8/16-bit PNG and returns gray (1) or RGB (3) bytes.
inline std::vector<std::uint8_t> read_png_bytes(const std::filesystem::path& path,
                                                int& width, int& height,
                                                int want_channels) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw InputError("cannot open PNG: " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw InputError("not a PNG file: " + path.string());
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialization failed");
  }
  std::vector<std::uint8_t> bytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_gray =
      color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want_channels == 3 && is_gray) png_set_gray_to_rgb(png);
  if (want_channels == 1 && !is_gray)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  if (stride != static_cast<std::size_t>(width) * want_channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("unsupported PNG layout: " + path.string());
  }
  bytes.resize(stride * height);
  for (int y = 0; y < height; ++y) png_read_row(png, bytes.data() + stride * y, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return bytes;
}

}  // namespace detail

template <typename T>
void write_png(const std::filesystem::path& path, const Image<T>& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw InputError("PNG output supports 1 or 3 channels");
  std::vector<std::uint8_t> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) bytes[i] = to_byte(img.data()[i]);
  detail::write_png_bytes(path, img.width(), img.height(), img.channels(), bytes);
}

inline Image<double> read_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto bytes = detail::read_png_bytes(path, w, h, 3);
  Image<double> img(w, h, 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data()[i] = bytes[i] / 255.0;
  return img;
}

/// Masks are single-channel PNGs with values {0, 255}.
inline void write_mask_png(const std::filesystem::path& path, const Mask& m) {
  std::vector<std::uint8_t> bytes(m.bits.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = m.bits[i] ? 255 : 0;
  detail::write_png_bytes(path, m.width, m.height, 1, bytes);
}

inline Mask read_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto bytes = detail::read_png_bytes(path, w, h, 1);
  Mask m(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] != 0 && bytes[i] != 255)
      throw InputError("mask is not binary {0,255}: " + path.string());
    m.bits[i] = bytes[i] ? 1 : 0;
  }
  return m;
}

}  // namespace uvtex
