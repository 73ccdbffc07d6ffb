// Copyright 2026 The supdict Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Grayscale image files: PNG (8/16 bit, via libpng) and binary PGM (P5).
// Color PNGs are reduced to BT.601 luma on load. 16-bit samples map to the
// [0, 255] intensity scale by v / 257. Export clips to the valid range and
// rounds half away from zero.

#include <supdict/image.hpp>

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace supdict {

enum class BitDepth { eight = 8, sixteen = 16 };

inline std::uint8_t to_u8(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

inline std::uint16_t to_u16(double v) {
  const double s = v * 257.0;
  if (!(s > 0.0)) return 0;
  if (s >= 65535.0) return 65535;
  return static_cast<std::uint16_t>(std::floor(s + 0.5));
}

namespace detail {

inline bool has_suffix(const std::string& path, const std::string& suffix) {
  if (path.size() < suffix.size()) return false;
  for (size_t i = 0; i < suffix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(path[path.size() - suffix.size() + i])) != suffix[i]) return false;
  return true;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline double bt601(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

// All C++ objects that must survive a longjmp are created by the caller.
inline bool png_read_raw(std::FILE* fp, std::vector<std::uint8_t>& buffer, png_uint_32& w, png_uint_32& h,
                         int& depth, int& channels, std::string& err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    err = "cannot create PNG reader";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    err = "cannot create PNG info";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    err = "corrupt PNG data";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool png_write_raw(std::FILE* fp, const std::vector<std::uint8_t>& buffer, png_uint_32 w, png_uint_32 h,
                          int depth, std::string& err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    err = "cannot create PNG writer";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    err = "cannot create PNG info";
    return false;
  }
  std::vector<png_bytep> rows(h);
  const size_t rowbytes = static_cast<size_t>(w) * static_cast<size_t>(depth / 8);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = const_cast<png_bytep>(buffer.data() + y * rowbytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    err = "PNG write failed";
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

inline Image read_png(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path);
  std::uint8_t sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw DataError(path + ": not a PNG file");
  std::rewind(fp.get());
  std::vector<std::uint8_t> buf;
  png_uint_32 w = 0, h = 0;
  int depth = 0, channels = 0;
  std::string err;
  if (!detail::png_read_raw(fp.get(), buf, w, h, depth, channels, err)) throw DataError(path + ": " + err);
  const size_t bytes = static_cast<size_t>(depth / 8);
  auto sample = [&](size_t idx) -> double {
    if (bytes == 1) return buf[idx];
    const unsigned v = (static_cast<unsigned>(buf[2 * idx]) << 8) | buf[2 * idx + 1];
    return v / 257.0;
  };
  Image img(static_cast<int>(w), static_cast<int>(h));
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x) {
      const size_t base = (static_cast<size_t>(y) * w + x) * static_cast<size_t>(channels);
      double v;
      if (channels <= 2)
        v = sample(base);
      else
        v = detail::bt601(sample(base), sample(base + 1), sample(base + 2));
      img(static_cast<int>(x), static_cast<int>(y)) = v;
    }
  return img;
}

inline void write_png(const Image& img, const std::string& path, BitDepth depth = BitDepth::eight) {
  const int d = static_cast<int>(depth);
  std::vector<std::uint8_t> buf(img.size() * static_cast<size_t>(d / 8));
  size_t i = 0;
  for (double v : img.pixels()) {
    if (depth == BitDepth::eight) {
      buf[i++] = to_u8(v);
    } else {
      const std::uint16_t s = to_u16(v);
      buf[i++] = static_cast<std::uint8_t>(s >> 8);
      buf[i++] = static_cast<std::uint8_t>(s & 0xff);
    }
  }
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot create " + path);
  std::string err;
  if (!detail::png_write_raw(fp.get(), buf, static_cast<png_uint_32>(img.width()),
                             static_cast<png_uint_32>(img.height()), d, err))
    throw DataError(path + ": " + err);
}

inline Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  if (token() != "P5") throw DataError(path + ": not a binary PGM (P5) file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw DataError(path + ": malformed PGM header");
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw DataError(path + ": invalid PGM header values");
  const size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<size_t>(w) * static_cast<size_t>(h) * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size()) throw DataError(path + ": truncated PGM data");
  Image img(w, h);
  const double factor = 255.0 / maxval;
  size_t i = 0;
  for (double& v : img.pixels()) {
    const unsigned s = bytes == 1 ? raw[i] : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    v = maxval == 255 ? static_cast<double>(s) : s * factor;
    ++i;
  }
  return img;
}

inline void write_pgm(const Image& img, const std::string& path, BitDepth depth = BitDepth::eight) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create " + path);
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << (depth == BitDepth::eight ? 255 : 65535) << '\n';
  for (double v : img.pixels()) {
    if (depth == BitDepth::eight) {
      out.put(static_cast<char>(to_u8(v)));
    } else {
      const std::uint16_t s = to_u16(v);
      out.put(static_cast<char>(s >> 8));
      out.put(static_cast<char>(s & 0xff));
    }
  }
  if (!out) throw DataError("write failed: " + path);
}

/// Dispatches on the file extension (.png, .pgm).
inline Image read_image(const std::string& path) {
  if (detail::has_suffix(path, ".png")) return read_png(path);
  if (detail::has_suffix(path, ".pgm")) return read_pgm(path);
  throw DataError(path + ": unsupported image format (expected .png or .pgm)");
}

inline void write_image(const Image& img, const std::string& path, BitDepth depth = BitDepth::eight) {
  if (detail::has_suffix(path, ".png")) return write_png(img, path, depth);
  if (detail::has_suffix(path, ".pgm")) return write_pgm(img, path, depth);
  throw DataError(path + ": unsupported image format (expected .png or .pgm)");
}

}  // namespace supdict
