#pragma once

// Sample synthesis for the four task families: region generation, distortion
// planning under ground-truth uniqueness, question instantiation from the
// pools, and templated answers.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "spider/distortion.hpp"
#include "spider/error.hpp"
#include "spider/imaging.hpp"
#include "spider/png_io.hpp"
#include "spider/point_semantics.hpp"
#include "spider/question_pools.hpp"
#include "spider/rng.hpp"

namespace spider {

inline constexpr std::string_view kGeneratorVersion = "spider-forge/1";

enum class TaskKind { GlobalDesc, LocalDesc, Grounding, Referring };
enum class SubTask { HybridIntensity, SingleIntensity, AccumulationOrder, RefShort, RefLong };
enum class Polarity { Max, Min };
enum class OrderPredicate { Sequence, First, Last };

constexpr std::string_view task_name(TaskKind k) noexcept {
  switch (k) {
    case TaskKind::GlobalDesc: return "GlobalDesc";
    case TaskKind::LocalDesc: return "LocalDesc";
    case TaskKind::Grounding: return "Grounding";
    case TaskKind::Referring: return "Referring";
  }
  return "";
}

constexpr std::string_view sub_task_name(SubTask s) noexcept {
  switch (s) {
    case SubTask::HybridIntensity: return "HyD-G";
    case SubTask::SingleIntensity: return "SiD-G";
    case SubTask::AccumulationOrder: return "DAO-G";
    case SubTask::RefShort: return "RefShort";
    case SubTask::RefLong: return "RefLong";
  }
  return "";
}

constexpr std::string_view polarity_name(Polarity p) noexcept { return p == Polarity::Max ? "max" : "min"; }

constexpr std::string_view predicate_name(OrderPredicate p) noexcept {
  switch (p) {
    case OrderPredicate::Sequence: return "sequence";
    case OrderPredicate::First: return "first";
    case OrderPredicate::Last: return "last";
  }
  return "";
}

struct Region {
  int id = 0;
  RegionMask mask;
  std::string semantic_label;
  DistortionPlan plan;
  friend bool operator==(const Region&, const Region&) = default;
};

/// A fully resolved grounding query.
struct GroundingQuery {
  SubTask sub_task = SubTask::HybridIntensity;
  Polarity polarity = Polarity::Max;                 // HyD-G, SiD-G
  std::optional<DistortionType> type;                // SiD-G
  OrderPredicate predicate = OrderPredicate::First;  // DAO-G
  std::vector<DistortionType> types;                 // DAO-G: two for Sequence, one otherwise
  friend bool operator==(const GroundingQuery&, const GroundingQuery&) = default;
};

struct Answer {
  std::optional<PositionalTerms> spatial;
  std::string semantic;
  RegionScope region_scope = RegionScope::Global;
  std::string body;
  std::vector<DistortionType> distortion_set;  // canonical type order, no repeats
  friend bool operator==(const Answer&, const Answer&) = default;
};

struct TaskRecord {
  int task_id = 0;
  TaskKind task = TaskKind::GlobalDesc;
  std::optional<SubTask> sub_task;
  std::string question;
  int question_index = 0;  // row in the pool the question came from
  Answer answer;
  std::optional<int> target_region_id;
  std::optional<GroundingQuery> query;
  friend bool operator==(const TaskRecord&, const TaskRecord&) = default;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string generator{kGeneratorVersion};
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SampleRecord {
  std::string sample_id;
  std::string image_path;
  Dims dims;
  std::vector<Region> regions;
  std::vector<TaskRecord> tasks;
  Provenance provenance;
  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;

  const Region* find_region(int id) const {
    for (const auto& r : regions)
      if (r.id == id) return &r;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Region-level facts shared by the builders

inline std::vector<DistortionType> type_set(const DistortionPlan& plan) {
  std::vector<DistortionType> out;
  for (auto t : kAllDistortionTypes) {
    for (const auto& s : plan.specs) {
      if (s.kind == t) {
        out.push_back(t);
        break;
      }
    }
  }
  return out;
}

/// Summed level of one type within a plan, or nullopt if the plan lacks it.
inline std::optional<int> type_intensity(const DistortionPlan& plan, DistortionType t) {
  std::optional<int> total;
  for (const auto& s : plan.specs) {
    if (s.kind == t) total = total.value_or(0) + s.level;
  }
  return total;
}

inline PositionalTerms region_terms(const Region& r) {
  return term_of_center(bbox_of_mask(r.mask).center, r.mask.dims());
}

/// "the <label> at the <vertical>-<horizontal>", or "the entire image" for a full-frame region.
inline std::string referring_phrase(const Region& r) {
  if (r.mask.is_full()) return "the entire image";
  return "the " + r.semantic_label + " at the " + spatial_phrase(region_terms(r));
}

/// Ids of every region satisfying the query predicate.
inline std::vector<int> matching_regions(const std::vector<Region>& regions, const GroundingQuery& q) {
  std::vector<int> ids;
  switch (q.sub_task) {
    case SubTask::HybridIntensity: {
      std::optional<int> best;
      for (const auto& r : regions) {
        const int v = cumulative_intensity(r.plan);
        if (!best || (q.polarity == Polarity::Max ? v > *best : v < *best)) best = v;
      }
      for (const auto& r : regions)
        if (best && cumulative_intensity(r.plan) == *best) ids.push_back(r.id);
      break;
    }
    case SubTask::SingleIntensity: {
      if (!q.type) break;
      std::optional<int> best;
      for (const auto& r : regions) {
        const auto v = type_intensity(r.plan, *q.type);
        if (v && (!best || (q.polarity == Polarity::Max ? *v > *best : *v < *best))) best = v;
      }
      for (const auto& r : regions) {
        const auto v = type_intensity(r.plan, *q.type);
        if (v && v == best) ids.push_back(r.id);
      }
      break;
    }
    case SubTask::AccumulationOrder: {
      for (const auto& r : regions) {
        const auto& specs = r.plan.specs;
        if (specs.empty() || q.types.empty()) continue;
        bool hit = false;
        switch (q.predicate) {
          case OrderPredicate::Sequence:
            hit = q.types.size() == 2 && specs.size() == 2 && specs[0].kind == q.types[0] && specs[1].kind == q.types[1];
            break;
          case OrderPredicate::First: hit = specs.front().kind == q.types[0]; break;
          case OrderPredicate::Last: hit = specs.back().kind == q.types[0]; break;
        }
        if (hit) ids.push_back(r.id);
      }
      break;
    }
    default: break;
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Region synthesis

inline constexpr std::array<std::string_view, 64> kSemanticNouns = {
    "dog",      "cat",      "car",      "tree",     "house",    "boat",     "bicycle",  "chair",
    "table",    "lamp",     "flower",   "bird",     "horse",    "person",   "window",   "door",
    "bench",    "fence",    "bridge",   "tower",    "cloud",    "mountain", "river",    "road",
    "sign",     "bottle",   "cup",      "book",     "clock",    "vase",     "umbrella", "kite",
    "ball",     "train",    "bus",      "truck",    "airplane", "sheep",    "cow",      "elephant",
    "giraffe",  "zebra",    "bear",     "sofa",     "bed",      "plant",    "rock",     "wall",
    "roof",     "statue",   "fountain", "lake",     "beach",    "field",    "hill",     "forest",
    "building", "shop",     "street",   "sky",      "leaf",     "apple",    "orange",   "banana",
};

/// Disjoint rectangles and ellipses with distinct labels; ids are 1..count.
inline std::vector<Region> synth_regions(Dims dims, int count, std::uint64_t seed) {
  require_valid(dims);
  if (count < 1) fail(ErrorCode::Unsatisfiable, "region count must be at least 1");
  if (count > static_cast<int>(kSemanticNouns.size())) {
    fail(ErrorCode::Unsatisfiable, "at most " + std::to_string(kSemanticNouns.size()) + " regions per sample");
  }
  const int short_side = std::min(dims.width, dims.height);
  const int min_side = std::max(2, short_side / 8);
  const int max_side = std::max(min_side, short_side / 2);
  if (static_cast<std::size_t>(count) * static_cast<std::size_t>(min_side * min_side) > dims.area() ||
      min_side > short_side) {
    fail(ErrorCode::Unsatisfiable, std::to_string(count) + " regions of side >= " + std::to_string(min_side) +
                                       " cannot fit in " + to_string(dims));
  }

  Rng rng(seed);
  for (int round = 0; round < 16; ++round) {
    RegionMask occupied(dims);
    std::vector<RegionMask> masks;
    for (int attempt = 0; attempt < 500 && static_cast<int>(masks.size()) < count; ++attempt) {
      const int rw = rng.between(min_side, std::min(max_side, dims.width));
      const int rh = rng.between(min_side, std::min(max_side, dims.height));
      const int x0 = rng.between(0, dims.width - rw);
      const int y0 = rng.between(0, dims.height - rh);
      const bool ellipse = rng.chance(0.5);
      RegionMask m(dims);
      bool clash = false;
      for (int y = y0; y < y0 + rh && !clash; ++y) {
        for (int x = x0; x < x0 + rw; ++x) {
          if (ellipse) {
            const double dx = (x + 0.5 - (x0 + rw / 2.0)) / (rw / 2.0);
            const double dy = (y + 0.5 - (y0 + rh / 2.0)) / (rh / 2.0);
            if (dx * dx + dy * dy > 1.0) continue;
          }
          if (occupied.test(x, y)) {
            clash = true;
            break;
          }
          m.set(x, y);
        }
      }
      if (clash || m.empty()) continue;
      for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x)
          if (m.test(x, y)) occupied.set(x, y);
      masks.push_back(std::move(m));
    }
    if (static_cast<int>(masks.size()) < count) continue;

    std::vector<std::string> labels(kSemanticNouns.begin(), kSemanticNouns.end());
    rng.shuffle(labels);
    std::vector<Region> regions;
    for (int i = 0; i < count; ++i) {
      regions.push_back(Region{i + 1, std::move(masks[static_cast<std::size_t>(i)]), labels[static_cast<std::size_t>(i)], {}});
    }
    return regions;
  }
  fail(ErrorCode::Unsatisfiable, "could not place " + std::to_string(count) + " disjoint regions in " + to_string(dims));
}

namespace detail {

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace detail

/// Reads a directory of <stem>.png masks with matching <stem>.txt labels.
/// A trailing integer in the stem becomes the region id, otherwise the
/// 1-based position in sorted order.
inline std::vector<Region> load_external_regions(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> pngs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") pngs.push_back(e.path());
  }
  std::sort(pngs.begin(), pngs.end());
  if (pngs.empty()) fail(ErrorCode::NoRegions, "no mask PNGs in " + dir.string());

  std::vector<Region> regions;
  std::set<int> ids;
  for (std::size_t i = 0; i < pngs.size(); ++i) {
    const auto stem = pngs[i].stem().string();
    std::size_t digits = stem.size();
    while (digits > 0 && std::isdigit(static_cast<unsigned char>(stem[digits - 1]))) --digits;
    const int id = digits < stem.size() ? std::stoi(stem.substr(digits)) : static_cast<int>(i) + 1;
    if (!ids.insert(id).second) fail(ErrorCode::SchemaViolation, "duplicate region id " + std::to_string(id));

    auto label_path = pngs[i];
    label_path.replace_extension(".txt");
    std::ifstream in(label_path);
    if (!in) fail(ErrorCode::IoError, "missing label file " + label_path.string());
    std::string label((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    label = detail::trim(label);
    if (label.empty()) fail(ErrorCode::SchemaViolation, "empty label in " + label_path.string());

    RegionMask mask = read_mask_png(pngs[i]);
    if (mask.empty()) fail(ErrorCode::EmptyMask, pngs[i].string() + " has no set pixels");
    if (!regions.empty()) require_same_dims(regions.front().mask.dims(), mask.dims(), pngs[i].string().c_str());
    for (const auto& other : regions) {
      if (mask_iou(other.mask, mask) > 0.0) {
        fail(ErrorCode::SchemaViolation, pngs[i].string() + " overlaps region " + std::to_string(other.id));
      }
    }
    regions.push_back(Region{id, std::move(mask), std::move(label), {}});
  }
  return regions;
}

// ---------------------------------------------------------------------------
// Distortion planning

/// Relative task frequencies: global, local, grounding, referring-short, referring-long.
struct TaskMix {
  std::array<double, 5> weights = {3251, 9742, 11669, 4506, 4222};
  std::array<double, 3> grounding_split = {1, 1, 1};  // HyD-G, SiD-G, DAO-G
};

/// A grounding query before it is bound to concrete types.
struct QueryRequest {
  SubTask sub_task = SubTask::HybridIntensity;
  Polarity polarity = Polarity::Max;
  OrderPredicate predicate = OrderPredicate::First;
};

inline constexpr int kPlanRetryBudget = 64;

namespace detail {

inline std::vector<DistortionType> legal_seconds(DistortionType first) {
  std::vector<DistortionType> out;
  for (auto t : kAllDistortionTypes)
    if (validate_order(first, t)) out.push_back(t);
  return out;
}

inline DistortionPlan random_plan(Rng& rng, std::uint64_t noise_seed) {
  DistortionPlan plan;
  if (rng.chance(0.6)) {
    std::vector<DistortionType> firsts;
    for (auto t : kAllDistortionTypes)
      if (!legal_seconds(t).empty()) firsts.push_back(t);
    const auto first = rng.pick(firsts);
    const auto second = rng.pick(legal_seconds(first));
    plan.specs.push_back({first, rng.between(1, 5), derive_seed(noise_seed, 0)});
    plan.specs.push_back({second, rng.between(1, 5), derive_seed(noise_seed, 1)});
  } else {
    const auto kind = kAllDistortionTypes[rng.below(kAllDistortionTypes.size())];
    plan.specs.push_back({kind, rng.between(1, 5), derive_seed(noise_seed, 0)});
  }
  return plan;
}

inline std::optional<GroundingQuery> resolve_query(const std::vector<Region>& regions, const QueryRequest& req, Rng& rng) {
  GroundingQuery q;
  q.sub_task = req.sub_task;
  if (req.sub_task == SubTask::AccumulationOrder) q.predicate = req.predicate;
  else q.polarity = req.polarity;
  switch (req.sub_task) {
    case SubTask::HybridIntensity:
      if (matching_regions(regions, q).size() == 1) return q;
      return std::nullopt;
    case SubTask::SingleIntensity: {
      std::vector<DistortionType> present;
      for (auto t : kAllDistortionTypes) {
        for (const auto& r : regions) {
          if (type_intensity(r.plan, t)) {
            present.push_back(t);
            break;
          }
        }
      }
      rng.shuffle(present);
      for (auto t : present) {
        q.type = t;
        if (matching_regions(regions, q).size() == 1) return q;
      }
      return std::nullopt;
    }
    case SubTask::AccumulationOrder: {
      std::vector<std::size_t> order(regions.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      for (auto i : order) {
        const auto& specs = regions[i].plan.specs;
        if (specs.empty()) continue;
        switch (req.predicate) {
          case OrderPredicate::Sequence:
            if (specs.size() != 2) continue;
            q.types = {specs[0].kind, specs[1].kind};
            break;
          case OrderPredicate::First: q.types = {specs.front().kind}; break;
          case OrderPredicate::Last: q.types = {specs.back().kind}; break;
        }
        if (matching_regions(regions, q).size() == 1) return q;
      }
      return std::nullopt;
    }
    default: return std::nullopt;
  }
}

}  // namespace detail

/// Assigns a legal plan to every region so that each requested query has
/// exactly one ground-truth region, and returns the bound queries in request
/// order. Plans are redrawn from scratch up to kPlanRetryBudget times.
inline std::vector<GroundingQuery> plan_distortions(std::vector<Region>& regions, const std::vector<QueryRequest>& requests,
                                                    std::uint64_t seed) {
  if (regions.empty()) fail(ErrorCode::NoRegions, "cannot plan distortions without regions");
  Rng rng(seed);
  for (int attempt = 0; attempt < kPlanRetryBudget; ++attempt) {
    for (auto& r : regions) {
      r.plan = detail::random_plan(rng, derive_seed(seed, static_cast<std::uint64_t>(attempt) * 4096 + static_cast<std::uint64_t>(r.id)));
      validate_plan(r.plan);
    }
    std::vector<GroundingQuery> bound;
    for (const auto& req : requests) {
      auto q = detail::resolve_query(regions, req, rng);
      if (!q) break;
      bound.push_back(std::move(*q));
    }
    if (bound.size() == requests.size()) return bound;
  }
  fail(ErrorCode::UniquenessFailure, "no plan assignment with unique ground truth after " +
                                         std::to_string(kPlanRetryBudget) + " attempts");
}

// ---------------------------------------------------------------------------
// Answer templates

constexpr std::string_view severity_word(int level) noexcept {
  constexpr std::array<std::string_view, 5> words = {"slight", "mild", "moderate", "strong", "severe"};
  return level >= 1 && level <= 5 ? words[static_cast<std::size_t>(level - 1)] : "unknown";
}

constexpr std::string_view effect_clause(DistortionType t) noexcept {
  switch (t) {
    case DistortionType::Blur: return "softened edges and loss of fine detail";
    case DistortionType::Noise: return "grainy speckles scattered across flat areas";
    case DistortionType::Compression: return "blocky artifacts and ringing around edges";
    case DistortionType::Pixelate: return "coarse square tiles that erase texture";
    case DistortionType::ContrastWeaken: return "a washed-out look with a flattened tonal range";
    case DistortionType::SaturateWeaken: return "dull, faded colors";
  }
  return "";
}

namespace detail {

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline std::string describe_plan(const DistortionPlan& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.specs.size(); ++i) {
    const auto& s = plan.specs[i];
    if (i > 0) out += " followed by ";
    out += std::string(type_name(s.kind)) + " (level " + std::to_string(s.level) + ", " +
           std::string(severity_word(s.level)) + ")";
  }
  return out;
}

inline std::string join_types(const std::vector<DistortionType>& types, std::string_view sep, std::string_view last_sep) {
  std::string out;
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (i > 0) out += i + 1 == types.size() ? last_sep : sep;
    out += type_name(types[i]);
  }
  return out;
}

inline std::string effects_sentence(const std::vector<DistortionType>& types) {
  std::string out;
  for (auto t : types) {
    if (!out.empty()) out += " ";
    out += std::string(type_name(t)) + " brings " + std::string(effect_clause(t)) + ".";
  }
  return out;
}

inline std::string region_sentence(const Region& r) {
  const auto types = type_set(r.plan);
  std::string effects;
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (i > 0) effects += " and ";
    effects += effect_clause(types[i]);
  }
  return capitalize(referring_phrase(r)) + " is affected by " + describe_plan(r.plan) + ", which causes " + effects + ".";
}

inline std::vector<DistortionType> union_types(const std::vector<Region>& regions) {
  std::vector<DistortionType> out;
  for (auto t : kAllDistortionTypes) {
    for (const auto& r : regions) {
      if (type_intensity(r.plan, t)) {
        out.push_back(t);
        break;
      }
    }
  }
  return out;
}

template <std::size_t N>
std::pair<int, std::string_view> draw_question(Rng& rng, const std::array<std::string_view, N>& pool, std::size_t lo = 0,
                                                std::size_t hi = N) {
  const auto i = lo + rng.below(hi - lo);
  return {static_cast<int>(i), pool[i]};
}

inline const Region& require_region(const SampleRecord& s, int id) {
  const Region* r = s.find_region(id);
  if (!r) fail(ErrorCode::UnknownRegion, s.sample_id + " has no region " + std::to_string(id));
  return *r;
}

}  // namespace detail

inline TaskRecord build_global_desc(const SampleRecord& sample, Rng& rng) {
  TaskRecord t;
  t.task = TaskKind::GlobalDesc;
  std::tie(t.question_index, std::ignore) = detail::draw_question(rng, pools::kGlobalDescription);
  t.question = std::string(pools::kGlobalDescription[static_cast<std::size_t>(t.question_index)]);

  std::string body;
  const bool uniform = sample.regions.size() == 1 && sample.regions.front().mask.is_full();
  if (!uniform) {
    body = "The image contains " + std::to_string(sample.regions.size()) + " distorted region" +
           (sample.regions.size() == 1 ? "" : "s") + ". ";
  }
  for (const auto& r : sample.regions) body += detail::region_sentence(r) + " ";
  body += uniform ? "The distortion is spread uniformly over the whole frame."
                  : "The remaining area is free of synthetic distortion.";
  t.answer.body = std::move(body);
  t.answer.semantic = "the image";
  t.answer.region_scope = RegionScope::Global;
  t.answer.distortion_set = detail::union_types(sample.regions);
  return t;
}

inline TaskRecord build_local_desc(const SampleRecord& sample, int region_id, Rng& rng) {
  const Region& r = detail::require_region(sample, region_id);
  TaskRecord t;
  t.task = TaskKind::LocalDesc;
  std::tie(t.question_index, std::ignore) = detail::draw_question(rng, pools::kLocalDescription);
  const std::string phrase = referring_phrase(r);
  t.question = pools::fill_slots(pools::kLocalDescription[static_cast<std::size_t>(t.question_index)],
                                 std::span<const std::string>(&phrase, 1));
  t.target_region_id = r.id;
  t.answer.spatial = region_terms(r);
  t.answer.semantic = "the " + r.semantic_label;
  t.answer.region_scope = r.mask.is_full() ? RegionScope::Global : RegionScope::Local;
  t.answer.distortion_set = type_set(r.plan);
  t.answer.body = detail::region_sentence(r) + " Its cumulative distortion intensity is " +
                  std::to_string(cumulative_intensity(r.plan)) + ".";
  return t;
}

inline TaskRecord build_grounding(const SampleRecord& sample, const GroundingQuery& query, Rng& rng) {
  const auto ids = matching_regions(sample.regions, query);
  if (ids.size() != 1) {
    fail(ErrorCode::UniquenessFailure, sample.sample_id + ": " + std::string(sub_task_name(query.sub_task)) +
                                           " query matches " + std::to_string(ids.size()) + " regions");
  }
  const Region& r = detail::require_region(sample, ids.front());
  TaskRecord t;
  t.task = TaskKind::Grounding;
  t.sub_task = query.sub_task;
  t.query = query;

  std::vector<std::string> fills;
  std::string_view tmpl;
  switch (query.sub_task) {
    case SubTask::HybridIntensity: {
      const std::size_t half = pools::kHybridGrounding.size() / 2;
      const auto lo = query.polarity == Polarity::Max ? 0 : half;
      std::tie(t.question_index, tmpl) = detail::draw_question(rng, pools::kHybridGrounding, lo, lo + half);
      break;
    }
    case SubTask::SingleIntensity: {
      const std::size_t half = pools::kSingleGrounding.size() / 2;
      const auto lo = query.polarity == Polarity::Max ? 0 : half;
      std::tie(t.question_index, tmpl) = detail::draw_question(rng, pools::kSingleGrounding, lo, lo + half);
      fills.emplace_back(type_phrase(*query.type));
      break;
    }
    case SubTask::AccumulationOrder: {
      const std::size_t lo = static_cast<std::size_t>(query.predicate) * 6;
      std::tie(t.question_index, tmpl) = detail::draw_question(rng, pools::kOrderGrounding, lo, lo + 6);
      for (auto k : query.types) fills.emplace_back(type_phrase(k));
      break;
    }
    default: fail(ErrorCode::SchemaViolation, "not a grounding sub-task");
  }
  t.question = pools::fill_slots(tmpl, fills);
  t.target_region_id = r.id;
  t.answer.spatial = region_terms(r);
  t.answer.semantic = "the " + r.semantic_label;
  t.answer.region_scope = r.mask.is_full() ? RegionScope::Global : RegionScope::Local;
  t.answer.distortion_set = type_set(r.plan);
  t.answer.body = r.mask.is_full() ? "The target region covers the entire image."
                                   : "The target region is " + referring_phrase(r) + ".";
  return t;
}

inline TaskRecord build_referring(const SampleRecord& sample, int region_id, SubTask pattern, Rng& rng) {
  const Region& r = detail::require_region(sample, region_id);
  const bool single = r.plan.specs.size() <= 1;
  const bool long_form = pattern == SubTask::RefLong;
  const auto& pool = single ? (long_form ? pools::kReferringSingleLong : pools::kReferringSingleShort)
                            : (long_form ? pools::kReferringMultiLong : pools::kReferringMultiShort);
  TaskRecord t;
  t.task = TaskKind::Referring;
  t.sub_task = long_form ? SubTask::RefLong : SubTask::RefShort;
  // Slotless entries name no region, so they are reserved for whole-frame targets.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (r.mask.is_full() || pools::slot_count(pool[i]) > 0) eligible.push_back(i);
  const auto pick = eligible[rng.below(eligible.size())];
  t.question_index = static_cast<int>(pick);
  const std::string_view tmpl = pool[pick];
  const std::string phrase = referring_phrase(r);
  t.question = pools::fill_slots(tmpl, std::span<const std::string>(&phrase, 1));
  t.target_region_id = r.id;
  t.answer.spatial = region_terms(r);
  t.answer.semantic = "the " + r.semantic_label;
  t.answer.region_scope = r.mask.is_full() ? RegionScope::Global : RegionScope::Local;
  t.answer.distortion_set = type_set(r.plan);
  const auto& types = t.answer.distortion_set;
  if (long_form) {
    t.answer.body = detail::capitalize(phrase) + " shows " + detail::join_types(types, ", ", " and ") + ". " +
                    detail::effects_sentence(types);
  } else {
    t.answer.body = detail::join_types(types, ", ", ", ") + ".";
  }
  return t;
}

// ---------------------------------------------------------------------------
// Whole samples

struct ForgeConfig {
  std::uint64_t seed = 7;
  int count = 4;
  Dims dims{256, 256};
  int tasks_per_sample = 4;
  int min_regions = 2;
  int max_regions = 3;
  double uniform_fraction = 0.1;  // samples whose single region is the full frame
  TaskMix mix;
  std::optional<std::vector<Region>> external_regions;
};

struct ForgedSample {
  SampleRecord record;
  std::optional<ImageBuffer> image;
};

inline std::string sample_id_for(int index) {
  std::string digits = std::to_string(index);
  return "s" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

/// Deterministic pristine test card with smooth gradients and high-frequency texture.
inline ImageBuffer render_test_card(Dims dims, std::uint64_t seed) {
  Rng rng(seed);
  const double fx = 0.15 + 0.35 * rng.uniform();
  const double fy = 0.1 + 0.3 * rng.uniform();
  const double phase = 6.0 * rng.uniform();
  const int cell = 4 << rng.below(3);
  const std::array<double, 3> tint = {rng.uniform(), rng.uniform(), rng.uniform()};
  ImageBuffer img(dims);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const double gx = static_cast<double>(x) / dims.width;
      const double gy = static_cast<double>(y) / dims.height;
      const double wave = std::sin(fx * x + phase) * std::cos(fy * y);
      const bool checker = ((x / cell) + (y / cell)) % 2 == 0;
      const double base[3] = {
          60 + 120 * gx * tint[0] + 50 * wave,
          60 + 120 * gy * tint[1] + (checker ? 40.0 : -20.0),
          80 + 100 * (1 - gx) * tint[2] + 35 * wave * (checker ? 1 : -1),
      };
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = detail::clamp_round(base[c]);
    }
  }
  return img;
}

/// Forges sample `index` of a run. Everything is derived from (config.seed, index),
/// so samples can be produced in any order or on any worker.
inline ForgedSample forge_sample(const ForgeConfig& config, int index, bool render_image = true) {
  const std::uint64_t sample_seed = derive_seed(config.seed, static_cast<std::uint64_t>(index));
  Rng rng(sample_seed);

  SampleRecord s;
  s.sample_id = sample_id_for(index);
  s.image_path = "images/" + s.sample_id + ".png";
  s.provenance.seed = config.seed;

  const bool uniform = !config.external_regions && rng.chance(config.uniform_fraction);
  if (config.external_regions) {
    s.regions = *config.external_regions;
    s.dims = s.regions.front().mask.dims();
  } else if (uniform) {
    s.dims = config.dims;
    s.regions.push_back(Region{1, RegionMask::full(config.dims), "entire image", {}});
  } else {
    s.dims = config.dims;
    s.regions = synth_regions(config.dims, rng.between(config.min_regions, config.max_regions), rng.next());
  }

  // Decide the task list first; grounding queries constrain the plans.
  std::vector<std::size_t> kinds;
  std::vector<QueryRequest> requests;
  for (int i = 0; i < config.tasks_per_sample; ++i) {
    std::size_t kind = rng.weighted(config.mix.weights);
    if (kind == 1 && uniform) kind = 0;
    kinds.push_back(kind);
    if (kind == 2) {
      QueryRequest req;
      const std::array<SubTask, 3> subs = {SubTask::HybridIntensity, SubTask::SingleIntensity, SubTask::AccumulationOrder};
      req.sub_task = subs[rng.weighted(config.mix.grounding_split)];
      req.polarity = rng.chance(0.5) ? Polarity::Max : Polarity::Min;
      req.predicate = static_cast<OrderPredicate>(rng.below(3));
      requests.push_back(req);
    }
  }
  const auto queries = plan_distortions(s.regions, requests, rng.next());

  std::size_t next_query = 0;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const int region_id = s.regions[rng.below(s.regions.size())].id;
    TaskRecord t;
    switch (kinds[i]) {
      case 0: t = build_global_desc(s, rng); break;
      case 1: t = build_local_desc(s, region_id, rng); break;
      case 2: t = build_grounding(s, queries[next_query++], rng); break;
      case 3: t = build_referring(s, region_id, SubTask::RefShort, rng); break;
      default: t = build_referring(s, region_id, SubTask::RefLong, rng); break;
    }
    t.task_id = static_cast<int>(i);
    s.tasks.push_back(std::move(t));
  }

  ForgedSample out{std::move(s), std::nullopt};
  if (render_image) {
    ImageBuffer img = render_test_card(out.record.dims, derive_seed(sample_seed, 0xC0FFEE));
    for (const auto& r : out.record.regions) img = apply_plan(img, r.plan, r.mask);
    out.image = std::move(img);
  }
  return out;
}

}  // namespace spider
