#pragma once

// PNG I/O for RGB images and 1-bit masks (libpng).

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "spider/error.hpp"
#include "spider/imaging.hpp"

namespace spider {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Fixed zlib settings keep the written bytes reproducible.
inline void write_png_rows(const std::filesystem::path& path, Dims dims, int bit_depth, int color_type,
                           const std::vector<std::vector<png_byte>>& rows) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IoError, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IoError, "libpng failed while writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(dims.width), static_cast<png_uint_32>(dims.height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& row : rows) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline std::vector<png_byte> read_png_simplified(const std::filesystem::path& path, png_uint_32 format, Dims& dims) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    fail(ErrorCode::IoError, "cannot read " + path.string() + ": " + image.message);
  }
  image.format = format;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorCode::IoError, "cannot decode " + path.string() + ": " + image.message);
  }
  dims = {static_cast<int>(image.width), static_cast<int>(image.height)};
  return buffer;
}

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const ImageBuffer& img) {
  std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(img.height()));
  const auto bytes = img.bytes();
  const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
  for (std::size_t y = 0; y < rows.size(); ++y) {
    rows[y].assign(bytes.begin() + static_cast<std::ptrdiff_t>(y * stride),
                   bytes.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
  }
  detail::write_png_rows(path, img.dims(), 8, PNG_COLOR_TYPE_RGB, rows);
}

inline ImageBuffer read_png(const std::filesystem::path& path) {
  Dims dims;
  auto buffer = detail::read_png_simplified(path, PNG_FORMAT_RGB, dims);
  return ImageBuffer(dims, std::vector<std::uint8_t>(buffer.begin(), buffer.end()));
}

/// 1-bit grayscale PNG; set bits are white.
inline void write_mask_png(const std::filesystem::path& path, const RegionMask& mask) {
  const std::size_t row_bytes = (static_cast<std::size_t>(mask.width()) + 7) / 8;
  std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(mask.height()), std::vector<png_byte>(row_bytes, 0));
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.test(x, y)) rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x / 8)] |= static_cast<png_byte>(0x80 >> (x % 8));
    }
  }
  detail::write_png_rows(path, mask.dims(), 1, PNG_COLOR_TYPE_GRAY, rows);
}

/// Any PNG; a pixel is set when its gray value is at least 128.
inline RegionMask read_mask_png(const std::filesystem::path& path) {
  Dims dims;
  auto buffer = detail::read_png_simplified(path, PNG_FORMAT_GRAY, dims);
  std::vector<std::uint8_t> bits(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) bits[i] = buffer[i] >= 128 ? 1 : 0;
  return RegionMask(dims, std::move(bits));
}

}  // namespace spider
