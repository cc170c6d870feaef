#pragma once

// Positional terms in both directions: quantizing a region center to
// {left,right} x {top,bottom}, and turning the four term logits back into a
// real-valued point prompt through a per-axis temperature softmax.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "spider/error.hpp"
#include "spider/imaging.hpp"

namespace spider {

enum class HorizontalTerm { Left, Right };
enum class VerticalTerm { Top, Bottom };

struct PositionalTerms {
  HorizontalTerm x = HorizontalTerm::Left;
  VerticalTerm y = VerticalTerm::Top;
  friend bool operator==(const PositionalTerms&, const PositionalTerms&) = default;
};

constexpr std::string_view term_word(HorizontalTerm t) noexcept { return t == HorizontalTerm::Left ? "left" : "right"; }
constexpr std::string_view term_word(VerticalTerm t) noexcept { return t == VerticalTerm::Top ? "top" : "bottom"; }

/// "<vertical>-<horizontal>", e.g. "bottom-left".
inline std::string spatial_phrase(PositionalTerms t) {
  return std::string(term_word(t.y)) + "-" + std::string(term_word(t.x));
}

inline std::optional<PositionalTerms> parse_spatial_phrase(std::string_view s) {
  for (auto v : {VerticalTerm::Top, VerticalTerm::Bottom}) {
    for (auto h : {HorizontalTerm::Left, HorizontalTerm::Right}) {
      if (spatial_phrase({h, v}) == s) return PositionalTerms{h, v};
    }
  }
  return std::nullopt;
}

/// Lower interval [0, 1/2) maps to left/top, the closed upper interval [1/2, 1] to right/bottom.
inline PositionalTerms term_of_center(Point center, Dims dims) {
  require_valid(dims);
  const double rx = center.x / dims.width;
  const double ry = center.y / dims.height;
  if (!(rx >= 0.0 && rx <= 1.0 && ry >= 0.0 && ry <= 1.0)) {
    fail(ErrorCode::OutOfFrame, "center (" + std::to_string(center.x) + ", " + std::to_string(center.y) +
                                    ") lies outside " + to_string(dims));
  }
  return {rx < 0.5 ? HorizontalTerm::Left : HorizontalTerm::Right, ry < 0.5 ? VerticalTerm::Top : VerticalTerm::Bottom};
}

struct TermLogits {
  double left = 0.0;
  double right = 0.0;
  double top = 0.0;
  double bottom = 0.0;
  double tau = 1.0;
};

struct TermProbabilities {
  double left = 0.5;
  double right = 0.5;
  double top = 0.5;
  double bottom = 0.5;
};

enum class SoftmaxMode {
  /// exp(chi / tau) / sum_j exp(chi_j / tau)
  Temperature,
  /// (exp(chi) / tau) / sum_j (exp(chi_j) / tau); tau cancels, kept for auditing
  AsPrinted,
};

namespace detail {

inline std::pair<double, double> softmax2(double a, double b, double scale) {
  const double m = std::max(a, b);
  const double ea = std::exp((a - m) / scale);
  const double eb = std::exp((b - m) / scale);
  const double s = ea + eb;
  return {ea / s, eb / s};
}

}  // namespace detail

inline TermProbabilities softmax_terms(const TermLogits& logits, SoftmaxMode mode = SoftmaxMode::Temperature) {
  if (!(logits.tau > 0.0)) fail(ErrorCode::NonPositiveTau, "tau must be positive, got " + std::to_string(logits.tau));
  if (!std::isfinite(logits.left) || !std::isfinite(logits.right) || !std::isfinite(logits.top) ||
      !std::isfinite(logits.bottom) || !std::isfinite(logits.tau)) {
    fail(ErrorCode::DegenerateInput, "term logits must be finite");
  }
  const double scale = mode == SoftmaxMode::Temperature ? logits.tau : 1.0;
  const auto [pl, pr] = detail::softmax2(logits.left, logits.right, scale);
  const auto [pt, pb] = detail::softmax2(logits.top, logits.bottom, scale);
  return {pl, pr, pt, pb};
}

/// Weighted average of the term indices (left/top = 0, right/bottom = 1),
/// scaled back to pixels.
inline Point point_from_probs(const TermProbabilities& p, Dims dims) {
  require_valid(dims);
  if (std::abs(p.left + p.right - 1.0) > 1e-9 || std::abs(p.top + p.bottom - 1.0) > 1e-9) {
    fail(ErrorCode::UnnormalizedProbs, "per-axis probabilities must sum to 1");
  }
  const double horizontal_index = 0.0 * p.left + 1.0 * p.right;
  const double vertical_index = 0.0 * p.top + 1.0 * p.bottom;
  return {horizontal_index * dims.width, vertical_index * dims.height};
}

/// Logits whose forward mapping lands on `target` (left/top logits fixed at 0).
inline TermLogits invert_point_to_logits(Point target, Dims dims, double tau) {
  require_valid(dims);
  if (!(tau > 0.0)) fail(ErrorCode::NonPositiveTau, "tau must be positive, got " + std::to_string(tau));
  const double px = target.x / dims.width;
  const double py = target.y / dims.height;
  if (!(px > 0.0 && px < 1.0 && py > 0.0 && py < 1.0)) {
    fail(ErrorCode::BoundaryPoint, "target (" + std::to_string(target.x) + ", " + std::to_string(target.y) +
                                       ") is not strictly inside " + to_string(dims));
  }
  TermLogits out;
  out.tau = tau;
  out.right = tau * std::log(px / (1.0 - px));
  out.bottom = tau * std::log(py / (1.0 - py));
  return out;
}

enum class RegionScope { Global, Local };

constexpr std::string_view scope_name(RegionScope s) noexcept { return s == RegionScope::Global ? "global" : "local"; }

inline std::optional<RegionScope> parse_scope(std::string_view s) noexcept {
  if (s == "global") return RegionScope::Global;
  if (s == "local") return RegionScope::Local;
  return std::nullopt;
}

struct SkipGrounding {
  RegionMask mask;  // full frame
};

using GroundingDecision = std::variant<SkipGrounding, Point>;

/// Global answers use the full frame as the mask; local answers become a point prompt.
inline GroundingDecision ground_or_skip(RegionScope scope, const std::optional<TermLogits>& logits, Dims dims,
                                        SoftmaxMode mode = SoftmaxMode::Temperature) {
  if (scope == RegionScope::Global) return SkipGrounding{RegionMask::full(dims)};
  if (!logits) fail(ErrorCode::MissingLogits, "local-scope answer has no term logits");
  return point_from_probs(softmax_terms(*logits, mode), dims);
}

}  // namespace spider
