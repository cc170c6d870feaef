#pragma once

// Synthetic distortion operators, their five-step severity scales, and the
// accumulation-order rules for two-step plans.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spider/error.hpp"
#include "spider/imaging.hpp"
#include "spider/rng.hpp"

namespace spider {

enum class DistortionType { Blur, Noise, Compression, Pixelate, ContrastWeaken, SaturateWeaken };

inline constexpr std::array<DistortionType, 6> kAllDistortionTypes = {
    DistortionType::Blur,     DistortionType::Noise,          DistortionType::Compression,
    DistortionType::Pixelate, DistortionType::ContrastWeaken, DistortionType::SaturateWeaken,
};

/// Canonical manifest spelling.
constexpr std::string_view type_name(DistortionType t) noexcept {
  switch (t) {
    case DistortionType::Blur: return "Blur";
    case DistortionType::Noise: return "Noise";
    case DistortionType::Compression: return "Compression";
    case DistortionType::Pixelate: return "Pixelate";
    case DistortionType::ContrastWeaken: return "Contrast Weaken";
    case DistortionType::SaturateWeaken: return "Saturate Weaken";
  }
  return "";
}

/// Lower-case spelling used inside question text.
constexpr std::string_view type_phrase(DistortionType t) noexcept {
  switch (t) {
    case DistortionType::Blur: return "blur";
    case DistortionType::Noise: return "noise";
    case DistortionType::Compression: return "compression";
    case DistortionType::Pixelate: return "pixelate";
    case DistortionType::ContrastWeaken: return "contrast weaken";
    case DistortionType::SaturateWeaken: return "saturate weaken";
  }
  return "";
}

inline std::optional<DistortionType> parse_type(std::string_view name) noexcept {
  for (auto t : kAllDistortionTypes) {
    if (type_name(t) == name) return t;
  }
  return std::nullopt;
}

struct DistortionSpec {
  DistortionType kind = DistortionType::Blur;
  int level = 1;
  std::uint64_t seed = 0;  // Noise only
  friend bool operator==(const DistortionSpec&, const DistortionSpec&) = default;
};

struct DistortionPlan {
  std::vector<DistortionSpec> specs;
  friend bool operator==(const DistortionPlan&, const DistortionPlan&) = default;
};

namespace detail {

inline std::uint8_t clamp_round(double v) {
  const long r = std::lround(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

// Symmetric reflection (edge pixel repeated), valid for any offset.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

inline void require_level(int level) {
  if (level < 1 || level > 5) fail(ErrorCode::InvalidLevel, "level must be 1..5, got " + std::to_string(level));
}

inline constexpr std::array<double, 5> kBlurSigma = {0.75, 1.5, 2.5, 3.5, 5.0};
inline constexpr std::array<double, 5> kNoiseSigma = {4.0, 8.0, 16.0, 32.0, 48.0};  // 8-bit units
inline constexpr std::array<double, 5> kQuantScale = {1.0, 2.0, 4.0, 8.0, 16.0};
inline constexpr std::array<int, 5> kPixelBlock = {2, 4, 8, 16, 32};
inline constexpr std::array<double, 5> kWeakenFactor = {0.8, 0.65, 0.5, 0.35, 0.2};

inline constexpr std::array<int, 64> kLumaQuant = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};

}  // namespace detail

/// Separable Gaussian blur with symmetric-reflect borders. Kernel radius is ceil(3 sigma).
inline ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  const int w = img.width();
  const int h = img.height();
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;

  const auto at = [w](int x, int y, int c) {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)) * 3 +
           static_cast<std::size_t>(c);
  };
  std::vector<double> horiz(img.dims().area() * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[static_cast<std::size_t>(k + radius)] * img.at(detail::reflect_index(x + k, w), y, c);
        }
        horiz[at(x, y, c)] = acc;
      }
    }
  }
  ImageBuffer out(img.dims());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[static_cast<std::size_t>(k + radius)] * horiz[at(x, detail::reflect_index(y + k, h), c)];
        }
        out.at(x, y, c) = detail::clamp_round(acc);
      }
    }
  }
  return out;
}

/// Additive Gaussian noise. Sample n = (y*W + x)*3 + c of the counter stream
/// `seed` perturbs channel c of pixel (x, y); results are rounded half away
/// from zero and clamped to [0, 255].
inline ImageBuffer add_gaussian_noise(const ImageBuffer& img, double sigma, std::uint64_t seed) {
  ImageBuffer out = img;
  auto bytes = out.bytes();
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    bytes[n] = detail::clamp_round(bytes[n] + sigma * counter_normal(seed, n));
  }
  return out;
}

/// JPEG-style artifact surrogate: JFIF YCbCr conversion, orthonormal 8x8 DCT
/// per plane, quantization by the luminance table times `scale`, inverse.
/// Partial edge blocks are padded by edge replication.
inline ImageBuffer block_dct_quantize(const ImageBuffer& img, double scale) {
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = img.dims().area();
  std::array<std::vector<double>, 3> planes;
  for (auto& p : planes) p.resize(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = img.at(x, y, 0), g = img.at(x, y, 1), b = img.at(x, y, 2);
      const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
      planes[0][i] = 0.299 * r + 0.587 * g + 0.114 * b;
      planes[1][i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
      planes[2][i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
    }
  }

  std::array<std::array<double, 8>, 8> basis{};
  for (int u = 0; u < 8; ++u) {
    const double cu = u == 0 ? std::sqrt(0.125) : 0.5;
    for (int x = 0; x < 8; ++x) basis[u][x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
  }

  for (auto& plane : planes) {
    for (int by = 0; by < h; by += 8) {
      for (int bx = 0; bx < w; bx += 8) {
        double block[8][8];
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            const int sx = std::min(bx + x, w - 1);
            const int sy = std::min(by + y, h - 1);
            block[y][x] = plane[static_cast<std::size_t>(sy) * static_cast<std::size_t>(w) + static_cast<std::size_t>(sx)] - 128.0;
          }
        }
        double coef[8][8];
        for (int v = 0; v < 8; ++v) {
          for (int u = 0; u < 8; ++u) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y) {
              for (int x = 0; x < 8; ++x) acc += basis[v][y] * basis[u][x] * block[y][x];
            }
            const double q = detail::kLumaQuant[static_cast<std::size_t>(v * 8 + u)] * scale;
            coef[v][u] = std::round(acc / q) * q;
          }
        }
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            if (by + y >= h || bx + x >= w) continue;
            double acc = 0.0;
            for (int v = 0; v < 8; ++v) {
              for (int u = 0; u < 8; ++u) acc += basis[v][y] * basis[u][x] * coef[v][u];
            }
            plane[static_cast<std::size_t>(by + y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(bx + x)] = acc + 128.0;
          }
        }
      }
    }
  }

  ImageBuffer out(img.dims());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
      const double yy = planes[0][i], cb = planes[1][i] - 128.0, cr = planes[2][i] - 128.0;
      out.at(x, y, 0) = detail::clamp_round(yy + 1.402 * cr);
      out.at(x, y, 1) = detail::clamp_round(yy - 0.344136 * cb - 0.714136 * cr);
      out.at(x, y, 2) = detail::clamp_round(yy + 1.772 * cb);
    }
  }
  return out;
}

/// Replaces every block x block tile (clipped at the frame edge) by its rounded mean.
inline ImageBuffer pixelate(const ImageBuffer& img, int block) {
  ImageBuffer out(img.dims());
  for (int by = 0; by < img.height(); by += block) {
    for (int bx = 0; bx < img.width(); bx += block) {
      const int ex = std::min(bx + block, img.width());
      const int ey = std::min(by + block, img.height());
      const long cnt = static_cast<long>(ex - bx) * (ey - by);
      for (int c = 0; c < 3; ++c) {
        long sum = 0;
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) sum += img.at(x, y, c);
        const auto mean = static_cast<std::uint8_t>((sum + cnt / 2) / cnt);
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) out.at(x, y, c) = mean;
      }
    }
  }
  return out;
}

/// out = mu + (in - mu) * factor with mu the per-channel image mean.
inline ImageBuffer weaken_contrast(const ImageBuffer& img, double factor) {
  std::array<double, 3> mean{};
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) mean[static_cast<std::size_t>(c)] += img.at(x, y, c);
  for (double& m : mean) m /= static_cast<double>(img.dims().area());
  ImageBuffer out(img.dims());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        const double mu = mean[static_cast<std::size_t>(c)];
        out.at(x, y, c) = detail::clamp_round(mu + (img.at(x, y, c) - mu) * factor);
      }
  return out;
}

/// Scales HSL saturation by `factor` with hue and lightness held fixed.
/// At fixed H and L every channel is L + chroma * k(H), so scaling S reduces
/// to out = L + (in - L) * factor with L = (max + min) / 2.
inline ImageBuffer weaken_saturation(const ImageBuffer& img, double factor) {
  ImageBuffer out(img.dims());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgb p = img.pixel(x, y);
      const double lightness = (std::max({p[0], p[1], p[2]}) + std::min({p[0], p[1], p[2]})) / 2.0;
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = detail::clamp_round(lightness + (p[static_cast<std::size_t>(c)] - lightness) * factor);
      }
    }
  }
  return out;
}

inline ImageBuffer apply_operator(const ImageBuffer& img, const DistortionSpec& spec) {
  detail::require_level(spec.level);
  const auto i = static_cast<std::size_t>(spec.level - 1);
  switch (spec.kind) {
    case DistortionType::Blur: return gaussian_blur(img, detail::kBlurSigma[i]);
    case DistortionType::Noise: return add_gaussian_noise(img, detail::kNoiseSigma[i], spec.seed);
    case DistortionType::Compression: return block_dct_quantize(img, detail::kQuantScale[i]);
    case DistortionType::Pixelate: return pixelate(img, detail::kPixelBlock[i]);
    case DistortionType::ContrastWeaken: return weaken_contrast(img, detail::kWeakenFactor[i]);
    case DistortionType::SaturateWeaken: return weaken_saturation(img, detail::kWeakenFactor[i]);
  }
  return img;
}

/// True iff `second` may be accumulated on top of `first`.
constexpr bool validate_order(DistortionType first, DistortionType second) noexcept {
  using D = DistortionType;
  switch (first) {
    case D::Blur: return second == D::Compression || second == D::Noise;
    case D::Compression: return second == D::Blur || second == D::Noise;
    case D::ContrastWeaken: return true;  // every type, itself included
    case D::Pixelate: return second == D::Noise;
    case D::SaturateWeaken: return second == D::Noise;
    case D::Noise: return false;
  }
  return false;
}

inline void validate_plan(const DistortionPlan& plan) {
  if (plan.specs.size() > 2) {
    fail(ErrorCode::IllegalOrder, "plans hold at most two distortions, got " + std::to_string(plan.specs.size()));
  }
  for (const auto& s : plan.specs) detail::require_level(s.level);
  if (plan.specs.size() == 2 && !validate_order(plan.specs[0].kind, plan.specs[1].kind)) {
    fail(ErrorCode::IllegalOrder, std::string(type_name(plan.specs[0].kind)) + " -> " +
                                      std::string(type_name(plan.specs[1].kind)) + " is not a distinguishable order");
  }
}

/// Runs each operator over the full frame and composites it through `region`
/// before the next one runs. Pixels outside `region` are returned untouched.
inline ImageBuffer apply_plan(const ImageBuffer& img, const DistortionPlan& plan, const RegionMask& region) {
  require_same_dims(img.dims(), region.dims(), "apply_plan");
  validate_plan(plan);
  ImageBuffer current = img;
  for (const auto& spec : plan.specs) {
    current = composite_by_mask(current, apply_operator(current, spec), region);
  }
  return current;
}

inline int cumulative_intensity(const DistortionPlan& plan) noexcept {
  int total = 0;
  for (const auto& s : plan.specs) total += s.level;
  return total;
}

}  // namespace spider
