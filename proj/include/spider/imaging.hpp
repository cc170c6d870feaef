#pragma once

// Raster, mask, bounding box and run-length primitives.
//
// Coordinates are pixel indices with the origin at the top-left corner;
// x grows to the right and y grows downward.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spider/error.hpp"

namespace spider {

struct Dims {
  int width = 0;
  int height = 0;

  std::size_t area() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(Dims d) {
  return std::to_string(d.width) + "x" + std::to_string(d.height);
}

inline void require_valid(Dims d) {
  if (d.width < 1 || d.height < 1) {
    fail(ErrorCode::DimMismatch, "dimensions must be positive, got " + to_string(d));
  }
}

using Rgb = std::array<std::uint8_t, 3>;

/// W x H 8-bit RGB raster, row-major.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(Dims dims, Rgb fill = {0, 0, 0}) : dims_(dims) {
    require_valid(dims);
    data_.resize(dims.area() * 3);
    for (std::size_t i = 0; i < dims.area(); ++i) {
      std::copy(fill.begin(), fill.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * 3));
    }
  }
  ImageBuffer(Dims dims, std::vector<std::uint8_t> interleaved) : dims_(dims), data_(std::move(interleaved)) {
    require_valid(dims);
    if (data_.size() != dims.area() * 3) {
      fail(ErrorCode::LengthMismatch, "pixel buffer holds " + std::to_string(data_.size()) +
                                          " bytes, expected " + std::to_string(dims.area() * 3));
    }
  }

  Dims dims() const noexcept { return dims_; }
  int width() const noexcept { return dims_.width; }
  int height() const noexcept { return dims_.height; }

  std::uint8_t& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.width) +
                  static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c)];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.width) +
                  static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c)];
  }
  Rgb pixel(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }
  void set_pixel(int x, int y, Rgb rgb) {
    for (int c = 0; c < 3; ++c) at(x, y, c) = rgb[static_cast<std::size_t>(c)];
  }

  std::span<const std::uint8_t> bytes() const noexcept { return data_; }
  std::span<std::uint8_t> bytes() noexcept { return data_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  Dims dims_{};
  std::vector<std::uint8_t> data_;
};

/// Inclusive integer bounding box.
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct BoxAndCenter {
  BBox bbox;
  Point center;
};

/// Uncompressed run lengths, row-major, starting with a run of zeros.
struct Rle {
  std::vector<std::uint32_t> counts;
  friend bool operator==(const Rle&, const Rle&) = default;
};

/// Binary membership mask over a W x H frame.
class RegionMask {
 public:
  RegionMask() = default;
  explicit RegionMask(Dims dims, bool value = false) : dims_(dims) {
    require_valid(dims);
    bits_.assign(dims.area(), value ? 1 : 0);
  }
  RegionMask(Dims dims, std::vector<std::uint8_t> bits) : dims_(dims), bits_(std::move(bits)) {
    require_valid(dims);
    if (bits_.size() != dims.area()) {
      fail(ErrorCode::LengthMismatch, "mask holds " + std::to_string(bits_.size()) + " bits, expected " +
                                          std::to_string(dims.area()));
    }
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  static RegionMask full(Dims dims) { return RegionMask(dims, true); }

  Dims dims() const noexcept { return dims_; }
  int width() const noexcept { return dims_.width; }
  int height() const noexcept { return dims_.height; }

  bool test(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.width) + static_cast<std::size_t>(x)] != 0;
  }
  void set(int x, int y, bool v = true) {
    bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.width) + static_cast<std::size_t>(x)] = v ? 1 : 0;
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < dims_.width && y < dims_.height && test(x, y);
  }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool empty() const noexcept { return count() == 0; }
  bool is_full() const noexcept { return count() == bits_.size(); }

  friend bool operator==(const RegionMask&, const RegionMask&) = default;

 private:
  Dims dims_{};
  std::vector<std::uint8_t> bits_;
};

inline void require_same_dims(Dims a, Dims b, const char* what) {
  if (a != b) fail(ErrorCode::DimMismatch, std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
}

inline Rle rle_encode(const RegionMask& mask) {
  Rle rle;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint8_t bit : mask.bits()) {
    if (bit != current) {
      rle.counts.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

inline RegionMask rle_decode(const Rle& rle, Dims dims) {
  require_valid(dims);
  std::uint64_t total = 0;
  for (auto c : rle.counts) total += c;
  if (total != dims.area()) {
    fail(ErrorCode::LengthMismatch,
         "run lengths sum to " + std::to_string(total) + ", frame " + to_string(dims) + " has " +
             std::to_string(dims.area()) + " pixels");
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(dims.area());
  std::uint8_t value = 0;
  for (auto c : rle.counts) {
    bits.insert(bits.end(), c, value);
    value ^= 1;
  }
  return RegionMask(dims, std::move(bits));
}

/// |a ∩ b| / |a ∪ b|. Two empty masks compare as identical (1.0).
inline double mask_iou(const RegionMask& a, const RegionMask& b) {
  require_same_dims(a.dims(), b.dims(), "mask_iou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  auto ab = a.bits();
  auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += static_cast<std::size_t>(ab[i] & bb[i]);
    uni += static_cast<std::size_t>(ab[i] | bb[i]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline BoxAndCenter bbox_of_mask(const RegionMask& mask) {
  BBox box{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.test(x, y)) continue;
      box.x_min = std::min(box.x_min, x);
      box.y_min = std::min(box.y_min, y);
      box.x_max = std::max(box.x_max, x);
      box.y_max = std::max(box.y_max, y);
    }
  }
  if (box.x_max < 0) fail(ErrorCode::EmptyMask, "mask has no set pixels");
  return {box, Point{(box.x_min + box.x_max) / 2.0, (box.y_min + box.y_max) / 2.0}};
}

inline ImageBuffer composite_by_mask(const ImageBuffer& base, const ImageBuffer& overlay, const RegionMask& mask) {
  require_same_dims(base.dims(), overlay.dims(), "composite_by_mask base/overlay");
  require_same_dims(base.dims(), mask.dims(), "composite_by_mask image/mask");
  ImageBuffer out = base;
  auto dst = out.bytes();
  auto src = overlay.bytes();
  auto bits = mask.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    dst[i * 3 + 0] = src[i * 3 + 0];
    dst[i * 3 + 1] = src[i * 3 + 1];
    dst[i * 3 + 2] = src[i * 3 + 2];
  }
  return out;
}

}  // namespace spider
