#pragma once

// Line-delimited manifest: one SampleRecord JSON object per line, schema
// "spider-manifest/1". Masks are stored inline as run lengths or as
// references to 1-bit PNGs next to the manifest.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spider/forge.hpp"
#include "spider/png_io.hpp"

namespace spider {

inline constexpr std::string_view kManifestSchema = "spider-manifest/1";
inline constexpr std::string_view kManifestFileName = "manifest.jsonl";

enum class MaskFormat { InlineRle, Png };

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline ordered_json types_to_json(const std::vector<DistortionType>& types) {
  ordered_json arr = ordered_json::array();
  for (auto t : types) arr.push_back(std::string(type_name(t)));
  return arr;
}

inline ordered_json rle_to_json(const Rle& rle) {
  ordered_json arr = ordered_json::array();
  for (auto c : rle.counts) arr.push_back(c);
  return arr;
}

inline std::string mask_file_name(const SampleRecord& s, int region_id) {
  return "masks/" + s.sample_id + "_r" + std::to_string(region_id) + ".png";
}

}  // namespace detail

inline ordered_json query_to_json(const GroundingQuery& q) {
  ordered_json j;
  switch (q.sub_task) {
    case SubTask::HybridIntensity: j["polarity"] = polarity_name(q.polarity); break;
    case SubTask::SingleIntensity:
      j["polarity"] = polarity_name(q.polarity);
      j["type"] = q.type ? ordered_json(std::string(type_name(*q.type))) : ordered_json(nullptr);
      break;
    case SubTask::AccumulationOrder:
      j["predicate"] = predicate_name(q.predicate);
      j["types"] = detail::types_to_json(q.types);
      break;
    default: break;
  }
  return j;
}

inline ordered_json task_to_json(const TaskRecord& t) {
  ordered_json j;
  j["task_id"] = t.task_id;
  j["task"] = task_name(t.task);
  j["sub_task"] = t.sub_task ? ordered_json(std::string(sub_task_name(*t.sub_task))) : ordered_json(nullptr);
  j["question"] = t.question;
  j["question_index"] = t.question_index;
  j["query"] = t.query ? query_to_json(*t.query) : ordered_json(nullptr);
  ordered_json a;
  a["spatial"] = t.answer.spatial ? ordered_json(spatial_phrase(*t.answer.spatial)) : ordered_json(nullptr);
  a["semantic"] = t.answer.semantic;
  a["region_scope"] = scope_name(t.answer.region_scope);
  a["body"] = t.answer.body;
  a["distortion_set"] = detail::types_to_json(t.answer.distortion_set);
  j["answer"] = std::move(a);
  j["target_region_id"] = t.target_region_id ? ordered_json(*t.target_region_id) : ordered_json(nullptr);
  return j;
}

/// Serializes one sample. With MaskFormat::Png the caller is responsible for
/// writing the referenced mask files (write_manifest does this).
inline ordered_json sample_to_json(const SampleRecord& s, MaskFormat format = MaskFormat::InlineRle) {
  ordered_json j;
  j["schema"] = kManifestSchema;
  j["sample_id"] = s.sample_id;
  j["image"] = s.image_path;
  j["width"] = s.dims.width;
  j["height"] = s.dims.height;
  j["provenance"] = {{"seed", s.provenance.seed}, {"generator", s.provenance.generator}};
  ordered_json regions = ordered_json::array();
  for (const auto& r : s.regions) {
    const auto bc = bbox_of_mask(r.mask);
    ordered_json rj;
    rj["id"] = r.id;
    rj["label"] = r.semantic_label;
    rj["bbox"] = {bc.bbox.x_min, bc.bbox.y_min, bc.bbox.x_max, bc.bbox.y_max};
    rj["center"] = {bc.center.x, bc.center.y};
    rj["terms"] = spatial_phrase(term_of_center(bc.center, s.dims));
    rj["cumulative_intensity"] = cumulative_intensity(r.plan);
    ordered_json plan = ordered_json::array();
    for (const auto& spec : r.plan.specs) {
      plan.push_back({{"type", std::string(type_name(spec.kind))}, {"level", spec.level}, {"seed", spec.seed}});
    }
    rj["plan"] = std::move(plan);
    if (format == MaskFormat::InlineRle) {
      rj["mask"] = {{"rle", detail::rle_to_json(rle_encode(r.mask))}};
    } else {
      rj["mask"] = {{"png", detail::mask_file_name(s, r.id)}};
    }
    regions.push_back(std::move(rj));
  }
  j["regions"] = std::move(regions);
  ordered_json tasks = ordered_json::array();
  for (const auto& t : s.tasks) tasks.push_back(task_to_json(t));
  j["tasks"] = std::move(tasks);
  return j;
}

// ---------------------------------------------------------------------------
// Reading

namespace detail {

class JsonReader {
 public:
  explicit JsonReader(std::size_t line) : line_(line) {}

  [[noreturn]] void violation(const std::string& path, const std::string& what) const {
    fail(ErrorCode::SchemaViolation, "line " + std::to_string(line_) + ": " + path + ": " + what);
  }

  const ordered_json& field(const ordered_json& obj, const std::string& key, const std::string& path) const {
    if (!obj.is_object()) violation(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) violation(path + "." + key, "missing");
    return *it;
  }

  std::string str(const ordered_json& obj, const std::string& key, const std::string& path) const {
    const auto& v = field(obj, key, path);
    if (!v.is_string()) violation(path + "." + key, "expected a string");
    return v.get<std::string>();
  }

  long long integer(const ordered_json& obj, const std::string& key, const std::string& path) const {
    const auto& v = field(obj, key, path);
    if (!v.is_number_integer()) violation(path + "." + key, "expected an integer");
    return v.get<long long>();
  }

  std::uint64_t u64(const ordered_json& obj, const std::string& key, const std::string& path) const {
    const auto& v = field(obj, key, path);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      violation(path + "." + key, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  const ordered_json& array(const ordered_json& obj, const std::string& key, const std::string& path) const {
    const auto& v = field(obj, key, path);
    if (!v.is_array()) violation(path + "." + key, "expected an array");
    return v;
  }

  DistortionType type(const ordered_json& v, const std::string& path) const {
    if (!v.is_string()) violation(path, "expected a distortion type string");
    auto t = parse_type(v.get<std::string>());
    if (!t) violation(path, "unknown distortion type '" + v.get<std::string>() + "'");
    return *t;
  }

  std::vector<DistortionType> types(const ordered_json& arr, const std::string& path) const {
    std::vector<DistortionType> out;
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(type(arr[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline std::optional<SubTask> parse_sub_task(std::string_view s) {
  for (auto k : {SubTask::HybridIntensity, SubTask::SingleIntensity, SubTask::AccumulationOrder, SubTask::RefShort,
                 SubTask::RefLong}) {
    if (sub_task_name(k) == s) return k;
  }
  return std::nullopt;
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
  for (auto k : {TaskKind::GlobalDesc, TaskKind::LocalDesc, TaskKind::Grounding, TaskKind::Referring}) {
    if (task_name(k) == s) return k;
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses one manifest line. `base_dir` resolves PNG mask references.
inline SampleRecord sample_from_json(const ordered_json& j, std::size_t line, const std::filesystem::path& base_dir) {
  detail::JsonReader rd(line);
  SampleRecord s;
  if (rd.str(j, "schema", "$") != kManifestSchema) rd.violation("$.schema", "unsupported schema");
  s.sample_id = rd.str(j, "sample_id", "$");
  s.image_path = rd.str(j, "image", "$");
  s.dims = {static_cast<int>(rd.integer(j, "width", "$")), static_cast<int>(rd.integer(j, "height", "$"))};
  if (s.dims.width < 1 || s.dims.height < 1) rd.violation("$.width", "dimensions must be positive");
  const auto& prov = rd.field(j, "provenance", "$");
  s.provenance.seed = rd.u64(prov, "seed", "$.provenance");
  s.provenance.generator = rd.str(prov, "generator", "$.provenance");

  const auto& regions = rd.array(j, "regions", "$");
  std::set<int> ids;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::string path = "$.regions[" + std::to_string(i) + "]";
    const auto& rj = regions[i];
    Region r;
    r.id = static_cast<int>(rd.integer(rj, "id", path));
    if (!ids.insert(r.id).second) rd.violation(path + ".id", "duplicate region id " + std::to_string(r.id));
    r.semantic_label = rd.str(rj, "label", path);
    if (r.semantic_label.empty()) rd.violation(path + ".label", "empty label");
    const auto& plan = rd.array(rj, "plan", path);
    for (std::size_t k = 0; k < plan.size(); ++k) {
      const std::string sp = path + ".plan[" + std::to_string(k) + "]";
      DistortionSpec spec;
      spec.kind = rd.type(rd.field(plan[k], "type", sp), sp + ".type");
      spec.level = static_cast<int>(rd.integer(plan[k], "level", sp));
      spec.seed = rd.u64(plan[k], "seed", sp);
      r.plan.specs.push_back(spec);
    }
    try {
      validate_plan(r.plan);
    } catch (const Error& e) {
      rd.violation(path + ".plan", e.what());
    }
    const auto& mj = rd.field(rj, "mask", path);
    try {
      if (mj.contains("rle")) {
        Rle rle;
        for (const auto& c : rd.array(mj, "rle", path + ".mask")) {
          if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<long long>() >= 0)) {
            rd.violation(path + ".mask.rle", "run lengths must be non-negative integers");
          }
          rle.counts.push_back(c.get<std::uint32_t>());
        }
        r.mask = rle_decode(rle, s.dims);
      } else {
        r.mask = read_mask_png(base_dir / rd.str(mj, "png", path + ".mask"));
        require_same_dims(r.mask.dims(), s.dims, "mask png");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SchemaViolation) throw;
      rd.violation(path + ".mask", e.what());
    }
    if (r.mask.empty()) rd.violation(path + ".mask", "region mask is empty");
    for (const auto& other : s.regions) {
      if (mask_iou(other.mask, r.mask) > 0.0) rd.violation(path + ".mask", "overlaps region " + std::to_string(other.id));
    }
    const auto bc = bbox_of_mask(r.mask);
    if (rj.contains("cumulative_intensity") && rj["cumulative_intensity"] != cumulative_intensity(r.plan)) {
      rd.violation(path + ".cumulative_intensity", "disagrees with the plan");
    }
    if (rj.contains("terms") && rj["terms"] != spatial_phrase(term_of_center(bc.center, s.dims))) {
      rd.violation(path + ".terms", "disagrees with the mask center");
    }
    s.regions.push_back(std::move(r));
  }

  const auto& tasks = rd.array(j, "tasks", "$");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string path = "$.tasks[" + std::to_string(i) + "]";
    const auto& tj = tasks[i];
    TaskRecord t;
    t.task_id = static_cast<int>(rd.integer(tj, "task_id", path));
    auto kind = detail::parse_task_kind(rd.str(tj, "task", path));
    if (!kind) rd.violation(path + ".task", "unknown task");
    t.task = *kind;
    const auto& st = rd.field(tj, "sub_task", path);
    if (!st.is_null()) {
      if (!st.is_string()) rd.violation(path + ".sub_task", "expected a string or null");
      t.sub_task = detail::parse_sub_task(st.get<std::string>());
      if (!t.sub_task) rd.violation(path + ".sub_task", "unknown sub-task");
    }
    t.question = rd.str(tj, "question", path);
    t.question_index = static_cast<int>(rd.integer(tj, "question_index", path));

    const auto& qj = rd.field(tj, "query", path);
    if (!qj.is_null()) {
      if (!t.sub_task) rd.violation(path + ".query", "query without a grounding sub-task");
      GroundingQuery q;
      q.sub_task = *t.sub_task;
      const std::string qp = path + ".query";
      if (q.sub_task == SubTask::HybridIntensity || q.sub_task == SubTask::SingleIntensity) {
        const auto pol = rd.str(qj, "polarity", qp);
        if (pol != "max" && pol != "min") rd.violation(qp + ".polarity", "expected max or min");
        q.polarity = pol == "max" ? Polarity::Max : Polarity::Min;
        if (q.sub_task == SubTask::SingleIntensity) q.type = rd.type(rd.field(qj, "type", qp), qp + ".type");
      } else if (q.sub_task == SubTask::AccumulationOrder) {
        const auto pred = rd.str(qj, "predicate", qp);
        if (pred == "sequence") q.predicate = OrderPredicate::Sequence;
        else if (pred == "first") q.predicate = OrderPredicate::First;
        else if (pred == "last") q.predicate = OrderPredicate::Last;
        else rd.violation(qp + ".predicate", "expected sequence, first or last");
        q.types = rd.types(rd.array(qj, "types", qp), qp + ".types");
        if (q.types.size() != (q.predicate == OrderPredicate::Sequence ? 2u : 1u)) {
          rd.violation(qp + ".types", "wrong number of types for the predicate");
        }
      } else {
        rd.violation(qp, "query on a non-grounding sub-task");
      }
      t.query = std::move(q);
    }

    const auto& aj = rd.field(tj, "answer", path);
    const std::string ap = path + ".answer";
    const auto& spatial = rd.field(aj, "spatial", ap);
    if (!spatial.is_null()) {
      if (!spatial.is_string()) rd.violation(ap + ".spatial", "expected a string or null");
      t.answer.spatial = parse_spatial_phrase(spatial.get<std::string>());
      if (!t.answer.spatial) rd.violation(ap + ".spatial", "not a positional phrase");
    }
    t.answer.semantic = rd.str(aj, "semantic", ap);
    auto scope = parse_scope(rd.str(aj, "region_scope", ap));
    if (!scope) rd.violation(ap + ".region_scope", "expected global or local");
    t.answer.region_scope = *scope;
    t.answer.body = rd.str(aj, "body", ap);
    t.answer.distortion_set = rd.types(rd.array(aj, "distortion_set", ap), ap + ".distortion_set");

    const auto& target = rd.field(tj, "target_region_id", path);
    if (!target.is_null()) {
      if (!target.is_number_integer()) rd.violation(path + ".target_region_id", "expected an integer or null");
      t.target_region_id = target.get<int>();
      if (!s.find_region(*t.target_region_id)) {
        rd.violation(path + ".target_region_id",
                     "task " + std::to_string(i) + " references missing region " + std::to_string(*t.target_region_id));
      }
    }
    if ((t.task == TaskKind::Grounding || t.task == TaskKind::LocalDesc || t.task == TaskKind::Referring) &&
        !t.target_region_id) {
      rd.violation(path + ".target_region_id", "task " + std::to_string(i) + " requires a target region");
    }
    if (t.task == TaskKind::Grounding && !t.query) rd.violation(path + ".query", "grounding task without a query");
    s.tasks.push_back(std::move(t));
  }
  return s;
}

inline std::filesystem::path manifest_path(const std::filesystem::path& dir_or_file) {
  if (std::filesystem::is_directory(dir_or_file)) return dir_or_file / kManifestFileName;
  return dir_or_file;
}

/// Writes out_dir/manifest.jsonl, ordered by sample_id.
inline std::filesystem::path write_manifest(std::vector<SampleRecord> samples, const std::filesystem::path& out_dir,
                                            MaskFormat format = MaskFormat::InlineRle) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::sort(samples.begin(), samples.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
  if (format == MaskFormat::Png) fs::create_directories(out_dir / "masks");
  const auto path = out_dir / kManifestFileName;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& s : samples) {
    if (format == MaskFormat::Png) {
      for (const auto& r : s.regions) write_mask_png(out_dir / detail::mask_file_name(s, r.id), r.mask);
    }
    out << sample_to_json(s, format).dump() << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
  return path;
}

inline std::vector<SampleRecord> read_manifest(const std::filesystem::path& dir_or_file) {
  const auto path = manifest_path(dir_or_file);
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open manifest " + path.string());
  std::vector<SampleRecord> samples;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": $: " + e.what());
    }
    try {
      samples.push_back(sample_from_json(j, line_no, path.parent_path()));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(samples.back().sample_id).second) {
      fail(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": $.sample_id: duplicate " +
                                           samples.back().sample_id);
    }
  }
  return samples;
}

}  // namespace spider
