#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "spider/distortion.hpp"
#include "spider/error.hpp"
#include "spider/imaging.hpp"

namespace spider {

// ---------------------------------------------------------------------------
// Grounding

struct GroundingResult {
  std::string sample_id;
  int task_id = 0;
  std::string sub_task;
  double iou = 0.0;
};

inline GroundingResult make_grounding_result(std::string sample_id, int task_id, std::string sub_task,
                                             const RegionMask& pred, const RegionMask& gt) {
  return {std::move(sample_id), task_id, std::move(sub_task), mask_iou(pred, gt)};
}

struct MiouReport {
  std::map<std::string, double> per_sub_task;
  std::map<std::string, std::size_t> counts;
  double average = 0.0;  // sample-weighted over all results
  std::size_t total = 0;
};

inline MiouReport miou_report(const std::vector<GroundingResult>& results) {
  if (results.empty()) fail(ErrorCode::EmptyResults, "no grounding results to aggregate");
  MiouReport rep;
  std::map<std::string, double> sums;
  double total = 0.0;
  for (const auto& r : results) {
    sums[r.sub_task] += r.iou;
    ++rep.counts[r.sub_task];
    total += r.iou;
  }
  for (const auto& [k, v] : sums) rep.per_sub_task[k] = v / static_cast<double>(rep.counts[k]);
  rep.total = results.size();
  rep.average = total / static_cast<double>(results.size());
  return rep;
}

// ---------------------------------------------------------------------------
// Referring

using TypeSet = std::set<DistortionType>;

/// Case-insensitive keyword extraction of distortion types from free text.
inline TypeSet extract_types(const std::string& text) {
  static const std::vector<std::pair<DistortionType, std::regex>> patterns = [] {
    const auto icase = std::regex::ECMAScript | std::regex::icase;
    return std::vector<std::pair<DistortionType, std::regex>>{
        {DistortionType::Blur, std::regex(R"(\b(blur|blurry|blurred|blurring|blurriness|out of focus)\b)", icase)},
        {DistortionType::Noise, std::regex(R"(\b(noise|noisy|grain|grainy|graininess)\b)", icase)},
        {DistortionType::Compression,
         std::regex(R"(\b(compression|compressed|jpeg|blocky|blocking artifacts?|compression artifacts?)\b)", icase)},
        {DistortionType::Pixelate, std::regex(R"(\b(pixelate|pixelated|pixelation|pixelization|pixelisation)\b)", icase)},
        {DistortionType::ContrastWeaken,
         std::regex(R"(\b(contrast weaken|weakened contrast|weak contrast|low contrast|reduced contrast|contrast reduction)\b)",
                    icase)},
        {DistortionType::SaturateWeaken,
         std::regex(
             R"(\b(saturate weaken|saturation weaken|weakened saturation|low saturation|reduced saturation|desaturated|desaturation)\b)",
             icase)},
    };
  }();
  TypeSet out;
  for (const auto& [t, re] : patterns) {
    if (std::regex_search(text, re)) out.insert(t);
  }
  return out;
}

struct ReferringReport {
  double accuracy = 0.0;
  std::map<DistortionType, double> f1;  // diagnostic only
};

/// Fraction of items whose predicted type set equals the reference set exactly.
inline double referring_accuracy(const std::vector<TypeSet>& preds, const std::vector<TypeSet>& gts) {
  if (preds.size() != gts.size()) {
    fail(ErrorCode::LengthMismatch, std::to_string(preds.size()) + " predictions vs " + std::to_string(gts.size()) +
                                        " references");
  }
  if (preds.empty()) fail(ErrorCode::EmptyInput, "no referring items");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == gts[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

inline ReferringReport referring_report(const std::vector<TypeSet>& preds, const std::vector<TypeSet>& gts) {
  ReferringReport rep;
  rep.accuracy = referring_accuracy(preds, gts);
  for (auto t : kAllDistortionTypes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i].count(t) > 0;
      const bool g = gts[i].count(t) > 0;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    if (tp + fp + fn == 0) continue;
    rep.f1[t] = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Correlation

namespace detail {

inline bool is_constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

inline void require_pair(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) fail(ErrorCode::DegenerateInput, "score lists differ in length");
  if (x.size() < 3) fail(ErrorCode::DegenerateInput, "need at least three paired scores");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) fail(ErrorCode::DegenerateInput, "scores must be finite");
  }
  if (is_constant(x) || is_constant(y)) fail(ErrorCode::DegenerateInput, "constant score list");
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace detail

/// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

inline double plcc(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require_pair(x, y);
  return detail::pearson(x, y);
}

inline double srcc(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require_pair(x, y);
  return detail::pearson(average_ranks(x), average_ranks(y));
}

// ---------------------------------------------------------------------------
// Rater agreement

/// items x raters grid of 1..5 scores.
struct RatingsMatrix {
  std::string dimension;
  std::vector<std::vector<int>> scores;
};

/// ICC(2,1): two-way random effects, absolute agreement, single rater.
inline double icc(const RatingsMatrix& m) {
  const std::size_t n = m.scores.size();
  if (n < 2) fail(ErrorCode::DegenerateMatrix, "ICC needs at least two items");
  const std::size_t k = m.scores.front().size();
  if (k < 2) fail(ErrorCode::DegenerateMatrix, "ICC needs at least two raters");
  for (const auto& row : m.scores) {
    if (row.size() != k) fail(ErrorCode::DegenerateMatrix, "ragged ratings matrix");
  }
  double grand = 0.0;
  std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      row_mean[i] += m.scores[i][j];
      col_mean[j] += m.scores[i][j];
      grand += m.scores[i][j];
    }
  }
  for (auto& v : row_mean) v /= static_cast<double>(k);
  for (auto& v : col_mean) v /= static_cast<double>(n);
  grand /= static_cast<double>(n * k);

  double ss_total = 0.0, ss_rows = 0.0, ss_cols = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) ss_total += (m.scores[i][j] - grand) * (m.scores[i][j] - grand);
  for (double r : row_mean) ss_rows += static_cast<double>(k) * (r - grand) * (r - grand);
  for (double c : col_mean) ss_cols += static_cast<double>(n) * (c - grand) * (c - grand);
  const double ss_err = std::max(0.0, ss_total - ss_rows - ss_cols);
  if (ss_rows <= 1e-12 * std::max(1.0, ss_total)) {
    fail(ErrorCode::DegenerateMatrix, "no between-item variance");
  }

  const double nn = static_cast<double>(n), kk = static_cast<double>(k);
  const double ms_rows = ss_rows / (nn - 1.0);
  const double ms_cols = ss_cols / (kk - 1.0);
  const double ms_err = ss_err / ((nn - 1.0) * (kk - 1.0));
  return (ms_rows - ms_err) / (ms_rows + (kk - 1.0) * ms_err + (kk / nn) * (ms_cols - ms_err));
}

/// Median across raters; the mean of the two middle values for even counts.
inline double median_rating(std::vector<int> ratings) {
  if (ratings.empty()) fail(ErrorCode::EmptyInput, "instance without ratings");
  std::sort(ratings.begin(), ratings.end());
  const std::size_t n = ratings.size();
  return n % 2 == 1 ? ratings[n / 2] : (ratings[n / 2 - 1] + ratings[n / 2]) / 2.0;
}

inline constexpr double kVerificationPassShare = 0.80;

struct VerificationSummary {
  std::string dimension;
  std::array<std::size_t, 5> histogram{};  // bins 1..5 of floor(median)
  std::size_t instances = 0;
  double proportion_high = 0.0;             // share with median >= 4
  bool pass = false;                        // proportion_high > 0.80
};

inline std::vector<VerificationSummary> verification_summary(const std::vector<RatingsMatrix>& matrices) {
  if (matrices.empty()) fail(ErrorCode::EmptyInput, "no ratings supplied");
  std::vector<VerificationSummary> out;
  for (const auto& m : matrices) {
    if (m.scores.empty()) fail(ErrorCode::EmptyInput, "dimension '" + m.dimension + "' has no instances");
    VerificationSummary s;
    s.dimension = m.dimension;
    std::size_t high = 0;
    for (const auto& row : m.scores) {
      for (int v : row) {
        if (v < 1 || v > 5) fail(ErrorCode::DegenerateInput, "rating " + std::to_string(v) + " outside 1..5");
      }
      const double med = median_rating(row);
      ++s.histogram[static_cast<std::size_t>(std::floor(med)) - 1];
      high += med >= 4.0 ? 1 : 0;
    }
    s.instances = m.scores.size();
    s.proportion_high = static_cast<double>(high) / static_cast<double>(s.instances);
    s.pass = s.proportion_high > kVerificationPassShare;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace spider
