// Copyright 2026 The maskbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Codec layer: PNG (libpng simplified API), baseline JPEG (libjpeg) and
// uncompressed BMP. Everything decodes to 8-bit RGB; alpha is dropped.

#include <png.h>
#include <zlib.h>

#include <array>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <jpeglib.h>

#include "maskbench/error.hpp"
#include "maskbench/raster.hpp"

namespace maskbench {

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kStorageError, "cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kStorageError, "read failed: " + path.string());
  return data;
}

/// Writes through a sibling temp file and renames, so readers never see a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kStorageError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kStorageError, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kStorageError, "rename failed: " + path.string() + ": " + ec.message());
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace detail {

inline bool has_prefix(const Bytes& data, std::initializer_list<std::uint8_t> magic) {
  if (data.size() < magic.size()) return false;
  return std::equal(magic.begin(), magic.end(), data.begin());
}

inline std::uint32_t read_le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put_le32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_le16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_be32(Bytes& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

inline Bytes png_encode(const void* pixels, int width, int height, png_uint_32 format) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(width);
  png.image.height = static_cast<png_uint_32>(height);
  png.image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::kStorageError, std::string("png encode: ") + png.image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&png.image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::kStorageError, std::string("png encode: ") + png.image.message);
  }
  out.resize(size);
  return out;
}

// Inserts a pHYs chunk directly after IHDR (signature 8 bytes + IHDR 25 bytes).
inline Bytes png_with_dpi(Bytes png, int dpi) {
  const auto ppm = static_cast<std::uint32_t>(std::lround(dpi / 0.0254));
  Bytes chunk;
  put_be32(chunk, 9);
  const std::size_t type_at = chunk.size();
  for (char c : std::string("pHYs")) chunk.push_back(static_cast<std::uint8_t>(c));
  put_be32(chunk, ppm);
  put_be32(chunk, ppm);
  chunk.push_back(1);  // unit: metre
  const uLong crc = crc32(0L, chunk.data() + type_at, static_cast<uInt>(chunk.size() - type_at));
  put_be32(chunk, static_cast<std::uint32_t>(crc));
  constexpr std::size_t kAfterIhdr = 8 + 25;
  png.insert(png.begin() + kAfterIhdr, chunk.begin(), chunk.end());
  return png;
}

inline WordImage decode_png(const Bytes& data, std::string id) {
  PngImage png;
  if (!png_image_begin_read_from_memory(&png.image, data.data(), data.size())) {
    throw Error(ErrorCode::kDecodeError, std::string("png: ") + png.image.message);
  }
  png.image.format = PNG_FORMAT_RGB;
  const int w = static_cast<int>(png.image.width);
  const int h = static_cast<int>(png.image.height);
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png.image));
  // Transparent pixels composite onto white.
  png_color background{255, 255, 255};
  if (!png_image_finish_read(&png.image, &background, buf.data(), 0, nullptr)) {
    throw Error(ErrorCode::kDecodeError, std::string("png: ") + png.image.message);
  }
  Grid<Rgb> pixels(w, h);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = Rgb{buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
  }
  return WordImage{std::move(id), std::move(pixels)};
}

inline WordImage decode_bmp(const Bytes& data, std::string id) {
  if (data.size() < 54) throw Error(ErrorCode::kDecodeError, "bmp: truncated header");
  const std::uint32_t pixel_offset = read_le32(&data[10]);
  const std::uint32_t info_size = read_le32(&data[14]);
  if (info_size < 40) throw Error(ErrorCode::kDecodeError, "bmp: unsupported info header");
  const auto w = static_cast<std::int32_t>(read_le32(&data[18]));
  const auto raw_h = static_cast<std::int32_t>(read_le32(&data[22]));
  const int bpp = read_le16(&data[28]);
  const std::uint32_t compression = read_le32(&data[30]);
  std::uint32_t colors_used = read_le32(&data[46]);
  if (w <= 0 || raw_h == 0) throw Error(ErrorCode::kDecodeError, "bmp: bad dimensions");
  if (compression != 0 && !(compression == 3 && bpp == 32)) {
    throw Error(ErrorCode::kDecodeError, "bmp: compressed bitmaps are not supported");
  }
  if (bpp != 8 && bpp != 24 && bpp != 32) {
    throw Error(ErrorCode::kDecodeError, "bmp: unsupported bit depth " + std::to_string(bpp));
  }
  const bool top_down = raw_h < 0;
  const int h = top_down ? -raw_h : raw_h;
  std::vector<Rgb> palette;
  if (bpp == 8) {
    if (colors_used == 0) colors_used = 256;
    const std::size_t pal_at = 14 + info_size;
    if (colors_used > 256 || pal_at + 4 * std::size_t(colors_used) > data.size()) {
      throw Error(ErrorCode::kDecodeError, "bmp: bad palette");
    }
    for (std::uint32_t i = 0; i < colors_used; ++i) {
      const std::uint8_t* e = &data[pal_at + 4 * i];
      palette.push_back(Rgb{e[2], e[1], e[0]});
    }
  }
  const std::size_t stride = (static_cast<std::size_t>(w) * bpp / 8 + 3) & ~std::size_t{3};
  if (pixel_offset + stride * static_cast<std::size_t>(h) > data.size()) {
    throw Error(ErrorCode::kDecodeError, "bmp: truncated pixel data");
  }
  Grid<Rgb> pixels(w, h);
  for (int y = 0; y < h; ++y) {
    const int src_row = top_down ? y : h - 1 - y;
    const std::uint8_t* row = &data[pixel_offset + stride * static_cast<std::size_t>(src_row)];
    for (int x = 0; x < w; ++x) {
      if (bpp == 8) {
        const std::uint8_t idx = row[x];
        if (idx >= palette.size()) throw Error(ErrorCode::kDecodeError, "bmp: palette index out of range");
        pixels(x, y) = palette[idx];
      } else {
        const std::uint8_t* p = row + static_cast<std::size_t>(x) * (bpp / 8);
        pixels(x, y) = Rgb{p[2], p[1], p[0]};
      }
    }
  }
  return WordImage{std::move(id), std::move(pixels)};
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// No C++ object is constructed or resized between setjmp and the last libjpeg
// call; output goes through a pointer to caller-owned storage.
inline bool jpeg_decode_raw(const Bytes& data, Bytes* out, int* width, int* height, char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    std::memcpy(message, err.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  *width = static_cast<int>(cinfo.output_width);
  *height = static_cast<int>(cinfo.output_height);
  out->resize(static_cast<std::size_t>(*width) * static_cast<std::size_t>(*height) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out->data() + static_cast<std::size_t>(cinfo.output_scanline) * *width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

inline WordImage decode_jpeg(const Bytes& data, std::string id) {
  Bytes buf;
  int w = 0;
  int h = 0;
  char message[JMSG_LENGTH_MAX] = {};
  if (!jpeg_decode_raw(data, &buf, &w, &h, message)) {
    throw Error(ErrorCode::kDecodeError, std::string("jpeg: ") + message);
  }
  Grid<Rgb> pixels(w, h);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = Rgb{buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
  }
  return WordImage{std::move(id), std::move(pixels)};
}

}  // namespace detail

/// Decodes PNG, BMP or JPEG by signature.
inline WordImage decode_image(const Bytes& data, std::string id = {}) {
  if (detail::has_prefix(data, {0x89, 'P', 'N', 'G'})) return detail::decode_png(data, std::move(id));
  if (detail::has_prefix(data, {'B', 'M'})) return detail::decode_bmp(data, std::move(id));
  if (detail::has_prefix(data, {0xFF, 0xD8, 0xFF})) return detail::decode_jpeg(data, std::move(id));
  throw Error(ErrorCode::kDecodeError, "unrecognized image format");
}

inline WordImage load_image(const std::filesystem::path& path, std::string id = {}) {
  if (id.empty()) id = path.stem().string();
  try {
    return decode_image(read_file(path), std::move(id));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

/// 8-bit single channel PNG; `dpi` adds a pHYs chunk.
inline Bytes encode_png_gray8(const Grid<std::uint8_t>& gray, std::optional<int> dpi = std::nullopt) {
  Bytes png = detail::png_encode(gray.values().data(), gray.width(), gray.height(), PNG_FORMAT_GRAY);
  return dpi ? detail::png_with_dpi(std::move(png), *dpi) : png;
}

inline Bytes encode_png_rgb(const Grid<Rgb>& rgb) {
  static_assert(sizeof(Rgb) == 3);
  return detail::png_encode(rgb.values().data(), rgb.width(), rgb.height(), PNG_FORMAT_RGB);
}

/// Strict reader for 8-bit greyscale PNGs; samples are returned untouched.
inline Grid<std::uint8_t> decode_png_gray8(const Bytes& data) {
  if (!detail::has_prefix(data, {0x89, 'P', 'N', 'G'}) || data.size() < 33) {
    throw Error(ErrorCode::kDecodeError, "not a png file");
  }
  // IHDR: bit depth at byte 24, colour type at byte 25.
  if (data[24] != 8 || data[25] != 0) {
    throw Error(ErrorCode::kDecodeError, "expected 8-bit greyscale png");
  }
  detail::PngImage png;
  if (!png_image_begin_read_from_memory(&png.image, data.data(), data.size())) {
    throw Error(ErrorCode::kDecodeError, std::string("png: ") + png.image.message);
  }
  png.image.format = PNG_FORMAT_GRAY;
  Grid<std::uint8_t> out(static_cast<int>(png.image.width), static_cast<int>(png.image.height));
  if (!png_image_finish_read(&png.image, nullptr, out.values().data(), 0, nullptr)) {
    throw Error(ErrorCode::kDecodeError, std::string("png: ") + png.image.message);
  }
  return out;
}

/// Reads the pHYs resolution (pixels per metre, x axis) if present.
inline std::optional<std::uint32_t> png_pixels_per_metre(const Bytes& data) {
  std::size_t at = 8;
  while (at + 12 <= data.size()) {
    const std::uint32_t len = std::uint32_t(data[at]) << 24 | std::uint32_t(data[at + 1]) << 16 |
                              std::uint32_t(data[at + 2]) << 8 | data[at + 3];
    if (std::memcmp(&data[at + 4], "pHYs", 4) == 0 && len == 9 && at + 17 <= data.size()) {
      const std::uint8_t* p = &data[at + 8];
      return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | p[3];
    }
    at += 12 + static_cast<std::size_t>(len);
  }
  return std::nullopt;
}

/// 24-bit bottom-up BMP.
inline Bytes encode_bmp_rgb(const Grid<Rgb>& rgb) {
  const std::size_t stride = (static_cast<std::size_t>(rgb.width()) * 3 + 3) & ~std::size_t{3};
  const std::size_t pixel_bytes = stride * static_cast<std::size_t>(rgb.height());
  Bytes out;
  out.push_back('B');
  out.push_back('M');
  detail::put_le32(out, static_cast<std::uint32_t>(54 + pixel_bytes));
  detail::put_le32(out, 0);
  detail::put_le32(out, 54);
  detail::put_le32(out, 40);
  detail::put_le32(out, static_cast<std::uint32_t>(rgb.width()));
  detail::put_le32(out, static_cast<std::uint32_t>(rgb.height()));
  detail::put_le16(out, 1);
  detail::put_le16(out, 24);
  for (int i = 0; i < 6; ++i) detail::put_le32(out, 0);
  for (int y = rgb.height() - 1; y >= 0; --y) {
    std::size_t written = 0;
    for (int x = 0; x < rgb.width(); ++x) {
      const Rgb p = rgb(x, y);
      out.push_back(p.b);
      out.push_back(p.g);
      out.push_back(p.r);
      written += 3;
    }
    for (; written < stride; ++written) out.push_back(0);
  }
  return out;
}

}  // namespace maskbench
