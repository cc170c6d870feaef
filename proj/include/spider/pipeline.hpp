#pragma once

// The four operator commands (forge, ground, eval, validate-ratings) as
// library calls. Each is a pure function of its config and input files.

#include <algorithm>
#include <array>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <variant>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "spider/forge.hpp"
#include "spider/manifest.hpp"
#include "spider/metrics.hpp"
#include "spider/png_io.hpp"
#include "spider/point_semantics.hpp"
#include "spider/segmentation.hpp"

namespace spider {

/// Exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitForge = 3,
  kExitGround = 4,
  kExitEval = 5,
  kExitValidateFail = 6,
};

namespace detail {

/// Runs fn(i) for i in [0, n) on `workers` threads, contiguous shards. The
/// first failure in index order is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n));
  std::vector<std::exception_ptr> errors(n);
  const auto run_shard = [&](std::size_t shard) {
    const std::size_t lo = n * shard / w;
    const std::size_t hi = n * (shard + 1) / w;
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        fn(i, shard);
      } catch (...) {
        errors[i] = std::current_exception();
        return;
      }
    }
  };
  if (w == 1) {
    run_shard(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t s = 0; s < w; ++s) threads.emplace_back(run_shard, s);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path, ErrorCode on_error) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      fail(on_error, path.filename().string() + " line " + std::to_string(line_no) + ": not a JSON object");
    }
    j["__line"] = line_no;
    out.push_back(std::move(j));
  }
  return out;
}

inline std::string task_key(const std::string& sample_id, int task_id) {
  return sample_id + "/" + std::to_string(task_id);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// forge

struct ForgeRun {
  ForgeConfig forge;
  std::filesystem::path out_dir;
  int workers = 1;
  MaskFormat mask_format = MaskFormat::InlineRle;
  bool write_images = true;
};

struct ForgeSummary {
  std::filesystem::path manifest;
  std::size_t samples = 0;
  // Global Des., Local Des., Grounding, Ref-short, Ref-long
  std::array<std::size_t, 5> task_counts{};
  std::map<std::string, std::size_t> grounding_counts;
};

inline void validate_forge_config(const ForgeRun& run) {
  const auto& c = run.forge;
  if (c.count < 1) fail(ErrorCode::ConfigError, "sample count must be at least 1");
  if (run.workers < 1) fail(ErrorCode::ConfigError, "workers must be at least 1");
  if (c.tasks_per_sample < 1) fail(ErrorCode::ConfigError, "tasks per sample must be at least 1");
  if (c.min_regions < 2 || c.max_regions < c.min_regions) {
    fail(ErrorCode::ConfigError, "region count range must satisfy 2 <= min <= max");
  }
  if (c.dims.width < 8 || c.dims.height < 8) fail(ErrorCode::ConfigError, "frames must be at least 8x8");
  if (!(c.uniform_fraction >= 0.0 && c.uniform_fraction <= 1.0)) fail(ErrorCode::ConfigError, "uniform fraction must lie in [0, 1]");
  const auto positive = [](auto& ws) {
    double s = 0;
    for (double w : ws) {
      if (w < 0) return false;
      s += w;
    }
    return s > 0;
  };
  if (!positive(c.mix.weights) || !positive(c.mix.grounding_split)) {
    fail(ErrorCode::ConfigError, "task mix weights must be non-negative with a positive sum");
  }
  if (run.out_dir.empty()) fail(ErrorCode::ConfigError, "output directory is required");
}

inline std::string forge_config_echo(const ForgeRun& run) {
  nlohmann::ordered_json j;
  const auto& c = run.forge;
  j["seed"] = c.seed;
  j["count"] = c.count;
  j["width"] = c.dims.width;
  j["height"] = c.dims.height;
  j["tasks_per_sample"] = c.tasks_per_sample;
  j["min_regions"] = c.min_regions;
  j["max_regions"] = c.max_regions;
  j["uniform_fraction"] = c.uniform_fraction;
  j["task_mix"] = c.mix.weights;
  j["grounding_split"] = c.mix.grounding_split;
  j["external_regions"] = c.external_regions.has_value();
  j["mask_format"] = run.mask_format == MaskFormat::Png ? "png" : "rle";
  j["generator"] = std::string(kGeneratorVersion);
  return j.dump(2);
}

inline ForgeSummary run_forge(const ForgeRun& run) {
  validate_forge_config(run);
  namespace fs = std::filesystem;
  fs::create_directories(run.out_dir);
  if (run.write_images) fs::create_directories(run.out_dir / "images");

  std::vector<SampleRecord> records(static_cast<std::size_t>(run.forge.count));
  detail::parallel_for(records.size(), run.workers, [&](std::size_t i, std::size_t) {
    auto forged = forge_sample(run.forge, static_cast<int>(i), run.write_images);
    if (forged.image) write_png(run.out_dir / forged.record.image_path, *forged.image);
    records[i] = std::move(forged.record);
  });

  ForgeSummary summary;
  summary.samples = records.size();
  for (const auto& s : records) {
    for (const auto& t : s.tasks) {
      switch (t.task) {
        case TaskKind::GlobalDesc: ++summary.task_counts[0]; break;
        case TaskKind::LocalDesc: ++summary.task_counts[1]; break;
        case TaskKind::Grounding:
          ++summary.task_counts[2];
          ++summary.grounding_counts[std::string(sub_task_name(*t.sub_task))];
          break;
        case TaskKind::Referring: ++summary.task_counts[*t.sub_task == SubTask::RefShort ? 3 : 4]; break;
      }
    }
  }
  summary.manifest = write_manifest(std::move(records), run.out_dir, run.mask_format);
  std::ofstream(run.out_dir / "forge_config.json", std::ios::binary | std::ios::trunc) << forge_config_echo(run) << '\n';
  return summary;
}

inline std::string format_task_statistics(const ForgeSummary& s) {
  std::string out = fmt::format("{:<8}{:>13}{:>13}{:>13}{:>13}{:>13}\n", "Tasks", "Global Des.", "Local Des.",
                                "Grounding", "Ref-short", "Ref-long");
  out += fmt::format("{:<8}{:>13}{:>13}{:>13}{:>13}{:>13}\n", "Count", s.task_counts[0], s.task_counts[1],
                     s.task_counts[2], s.task_counts[3], s.task_counts[4]);
  std::string split;
  for (const auto& [k, v] : s.grounding_counts) split += fmt::format(" {}={}", k, v);
  out += fmt::format("samples={} grounding:{}\n", s.samples, split);
  return out;
}

// ---------------------------------------------------------------------------
// ground

enum class SegmenterKind { Oracle, FloodFill, External };

constexpr std::string_view segmenter_name(SegmenterKind k) noexcept {
  switch (k) {
    case SegmenterKind::Oracle: return "oracle";
    case SegmenterKind::FloodFill: return "flood";
    case SegmenterKind::External: return "external";
  }
  return "";
}

struct GroundConfig {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> logits;
  bool oracle_logits = false;
  double tau = 1.0;
  SoftmaxMode softmax = SoftmaxMode::Temperature;
  SegmenterKind segmenter = SegmenterKind::Oracle;
  std::string peer_command;
  int color_tol = 12;
  std::filesystem::path out;
  int workers = 1;
};

struct LogitRecord {
  TermLogits logits;
  RegionScope scope = RegionScope::Local;
  std::string answer_text;
};

/// Parses the logit-intake file, keyed by "<sample_id>/<task_id>".
inline std::map<std::string, LogitRecord> read_logits(const std::filesystem::path& path, double default_tau) {
  std::map<std::string, LogitRecord> out;
  for (const auto& j : detail::read_jsonl(path, ErrorCode::SchemaViolation)) {
    const auto line = j["__line"].get<std::size_t>();
    const auto bad = [&](const std::string& what) -> void {
      fail(ErrorCode::SchemaViolation, path.filename().string() + " line " + std::to_string(line) + ": " + what);
    };
    if (!j.contains("sample_id") || !j["sample_id"].is_string()) bad("missing sample_id");
    if (!j.contains("task_id") || !j["task_id"].is_number_integer()) bad("missing integer task_id");
    if (!j.contains("chi") || !j["chi"].is_object()) bad("missing chi object");
    LogitRecord rec;
    const auto& chi = j["chi"];
    for (const char* k : {"left", "right", "top", "bottom"}) {
      if (!chi.contains(k) || !chi[k].is_number()) bad(std::string("chi.") + k + " must be a number");
    }
    rec.logits = {chi["left"].get<double>(), chi["right"].get<double>(), chi["top"].get<double>(),
                  chi["bottom"].get<double>(), default_tau};
    if (j.contains("tau")) {
      if (!j["tau"].is_number() || !(j["tau"].get<double>() > 0)) bad("tau must be a positive number");
      rec.logits.tau = j["tau"].get<double>();
    }
    if (!j.contains("region_scope") || !j["region_scope"].is_string() ||
        !parse_scope(j["region_scope"].get<std::string>())) {
      bad("region_scope must be 'global' or 'local'");
    }
    rec.scope = *parse_scope(j["region_scope"].get<std::string>());
    if (j.contains("answer_text") && j["answer_text"].is_string()) rec.answer_text = j["answer_text"].get<std::string>();
    const auto key = detail::task_key(j["sample_id"].get<std::string>(), j["task_id"].get<int>());
    if (!out.emplace(key, std::move(rec)).second) bad("duplicate logits for " + key);
  }
  return out;
}

struct GroundOutcome {
  std::size_t predictions = 0;
  std::size_t skipped = 0;
  std::size_t segmenter_calls = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // task key, message
};

inline GroundOutcome run_ground(const GroundConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.workers < 1) fail(ErrorCode::ConfigError, "workers must be at least 1");
  if (!cfg.oracle_logits && !cfg.logits) fail(ErrorCode::ConfigError, "either a logits file or oracle logits is required");
  if (cfg.segmenter == SegmenterKind::External && cfg.peer_command.empty()) {
    fail(ErrorCode::ConfigError, "external segmenter needs a peer command");
  }
  if (!(cfg.tau > 0)) fail(ErrorCode::ConfigError, "tau must be positive");
  if (cfg.out.empty()) fail(ErrorCode::ConfigError, "predictions output path is required");
  const auto mpath = manifest_path(cfg.manifest);
  if (!fs::exists(mpath)) fail(ErrorCode::ConfigError, "manifest " + mpath.string() + " not found");

  const auto samples = read_manifest(mpath);
  const auto base_dir = mpath.parent_path();
  std::map<std::string, LogitRecord> logits;
  if (!cfg.oracle_logits) logits = read_logits(*cfg.logits, cfg.tau);

  struct Job {
    const SampleRecord* sample;
    const TaskRecord* task;
  };
  std::vector<Job> jobs;
  for (const auto& s : samples)
    for (const auto& t : s.tasks)
      if (t.task == TaskKind::Grounding) jobs.push_back({&s, &t});

  // Resolve every decision up front so a missing logit aborts before any segmenter work.
  std::vector<GroundingDecision> decisions;
  decisions.reserve(jobs.size());
  for (const auto& job : jobs) {
    const auto key = detail::task_key(job.sample->sample_id, job.task->task_id);
    if (cfg.oracle_logits) {
      const auto scope = job.task->answer.region_scope;
      std::optional<TermLogits> lg;
      if (scope == RegionScope::Local) {
        const Region* target = job.sample->find_region(*job.task->target_region_id);
        lg = invert_point_to_logits(bbox_of_mask(target->mask).center, job.sample->dims, cfg.tau);
      }
      decisions.push_back(ground_or_skip(scope, lg, job.sample->dims, cfg.softmax));
    } else {
      auto it = logits.find(key);
      if (it == logits.end()) {
        if (job.task->answer.region_scope == RegionScope::Local) fail(ErrorCode::MissingLogits, "no logits for " + key);
        decisions.push_back(ground_or_skip(RegionScope::Global, std::nullopt, job.sample->dims, cfg.softmax));
      } else {
        decisions.push_back(ground_or_skip(it->second.scope, it->second.logits, job.sample->dims, cfg.softmax));
      }
    }
  }

  std::vector<std::string> lines(jobs.size());
  std::vector<std::optional<std::string>> errors(jobs.size());
  std::vector<char> called(jobs.size(), 0);
  const int workers = cfg.segmenter == SegmenterKind::External ? cfg.workers : std::min(cfg.workers, 64);
  std::vector<std::unique_ptr<ExternalSegmenter>> peers(static_cast<std::size_t>(workers));
  std::vector<std::string> peer_errors(static_cast<std::size_t>(workers));
  if (cfg.segmenter == SegmenterKind::External) {
    for (auto& p : peers) p = std::make_unique<ExternalSegmenter>(cfg.peer_command);
  }

  detail::parallel_for(jobs.size(), workers, [&](std::size_t i, std::size_t shard) {
    const auto& s = *jobs[i].sample;
    const auto& t = *jobs[i].task;
    nlohmann::ordered_json j;
    j["kind"] = "prediction";
    j["sample_id"] = s.sample_id;
    j["task_id"] = t.task_id;
    j["sub_task"] = std::string(sub_task_name(*t.sub_task));
    j["width"] = s.dims.width;
    j["height"] = s.dims.height;
    std::optional<RegionMask> mask;
    if (const auto* skip = std::get_if<SkipGrounding>(&decisions[i])) {
      j["decision"] = "skip";
      j["point"] = nullptr;
      mask = skip->mask;
    } else {
      const Point p = std::get<Point>(decisions[i]);
      j["decision"] = "point";
      j["point"] = {p.x, p.y};
      called[i] = 1;
      try {
        switch (cfg.segmenter) {
          case SegmenterKind::Oracle: {
            std::vector<RegionMask> masks;
            for (const auto& r : s.regions) masks.push_back(r.mask);
            mask = segment_oracle(p, masks);
            break;
          }
          case SegmenterKind::FloodFill:
            mask = segment_flood_fill(p, read_png(base_dir / s.image_path), cfg.color_tol);
            break;
          case SegmenterKind::External:
            mask = peers[shard]->segment(detail::task_key(s.sample_id, t.task_id), (base_dir / s.image_path).string(),
                                         p, s.dims);
            break;
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::PeerUnreachable) throw;
        errors[i] = e.what();
      }
    }
    j["rle"] = mask ? nlohmann::ordered_json(rle_encode(*mask).counts) : nlohmann::ordered_json(nullptr);
    if (errors[i]) j["error"] = *errors[i];
    lines[i] = j.dump();
  });

  nlohmann::ordered_json header;
  header["kind"] = "config";
  header["seed"] = samples.empty() ? 0 : samples.front().provenance.seed;
  header["tau"] = cfg.tau;
  header["softmax"] = cfg.softmax == SoftmaxMode::Temperature ? "temperature" : "as-printed";
  header["logits"] = cfg.oracle_logits ? "oracle" : "file";
  header["segmenter"] = std::string(segmenter_name(cfg.segmenter));
  header["oracle_assisted"] = cfg.oracle_logits || cfg.segmenter == SegmenterKind::Oracle;

  if (cfg.out.has_parent_path()) fs::create_directories(cfg.out.parent_path());
  std::ofstream out(cfg.out, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + cfg.out.string());
  out << header.dump() << '\n';
  for (const auto& l : lines) out << l << '\n';

  GroundOutcome outcome;
  outcome.predictions = jobs.size();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (std::holds_alternative<SkipGrounding>(decisions[i])) ++outcome.skipped;
    if (called[i]) ++outcome.segmenter_calls;
    if (errors[i]) outcome.failures.emplace_back(detail::task_key(jobs[i].sample->sample_id, jobs[i].task->task_id), *errors[i]);
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// eval

struct EvalConfig {
  std::filesystem::path manifest;
  std::filesystem::path predictions;
  std::optional<std::filesystem::path> answers;  // referring free text
  std::optional<std::filesystem::path> scores;   // paired quality scores
  std::filesystem::path out;
};

struct EvalOutcome {
  MiouReport miou;
  std::optional<ReferringReport> referring;
  std::size_t referring_items = 0;
  std::optional<std::pair<double, double>> srcc_plcc;
  std::size_t scored_items = 0;
  std::string report;
};

inline EvalOutcome run_eval(const EvalConfig& cfg) {
  namespace fs = std::filesystem;
  const auto mpath = manifest_path(cfg.manifest);
  if (!fs::exists(mpath)) fail(ErrorCode::ConfigError, "manifest " + mpath.string() + " not found");
  if (!fs::exists(cfg.predictions)) fail(ErrorCode::ConfigError, "predictions " + cfg.predictions.string() + " not found");
  const auto samples = read_manifest(mpath);

  nlohmann::json config_echo = nlohmann::json::object();
  std::map<std::string, nlohmann::json> preds;
  for (auto& j : detail::read_jsonl(cfg.predictions, ErrorCode::IdMismatch)) {
    if (j.value("kind", "") == "config") {
      config_echo = j;
      continue;
    }
    if (!j.contains("sample_id") || !j["sample_id"].is_string() || !j.contains("task_id") ||
        !j["task_id"].is_number_integer()) {
      fail(ErrorCode::IdMismatch, "prediction on line " + std::to_string(j["__line"].get<std::size_t>()) + " has no id");
    }
    const auto key = detail::task_key(j["sample_id"].get<std::string>(), j["task_id"].get<int>());
    if (!preds.emplace(key, j).second) fail(ErrorCode::IdMismatch, "duplicate prediction for " + key);
  }

  std::vector<GroundingResult> results;
  std::set<std::string> grounding_keys;
  for (const auto& s : samples) {
    for (const auto& t : s.tasks) {
      if (t.task != TaskKind::Grounding) continue;
      const auto key = detail::task_key(s.sample_id, t.task_id);
      grounding_keys.insert(key);
      auto it = preds.find(key);
      if (it == preds.end()) fail(ErrorCode::IdMismatch, "no prediction for grounding task " + key);
      const auto& p = it->second;
      const RegionMask& gt = s.find_region(*t.target_region_id)->mask;
      RegionMask pred(s.dims);
      if (p.contains("rle") && p["rle"].is_array()) {
        if (p.value("width", 0) != s.dims.width || p.value("height", 0) != s.dims.height) {
          fail(ErrorCode::IdMismatch, "prediction " + key + " has the wrong frame size");
        }
        Rle rle;
        for (const auto& c : p["rle"]) rle.counts.push_back(c.get<std::uint32_t>());
        pred = rle_decode(rle, s.dims);
      }
      results.push_back(make_grounding_result(s.sample_id, t.task_id, std::string(sub_task_name(*t.sub_task)), pred, gt));
    }
  }
  for (const auto& [key, _] : preds) {
    if (!grounding_keys.count(key)) fail(ErrorCode::IdMismatch, "prediction " + key + " matches no grounding task");
  }

  EvalOutcome outcome;
  outcome.miou = miou_report(results);

  if (cfg.answers) {
    std::map<std::string, std::string> answers;
    for (const auto& j : detail::read_jsonl(*cfg.answers, ErrorCode::IdMismatch)) {
      if (!j.contains("sample_id") || !j.contains("task_id") || !j.contains("answer_text")) {
        fail(ErrorCode::IdMismatch, "answer on line " + std::to_string(j["__line"].get<std::size_t>()) + " is incomplete");
      }
      answers[detail::task_key(j["sample_id"].get<std::string>(), j["task_id"].get<int>())] =
          j["answer_text"].get<std::string>();
    }
    std::vector<TypeSet> p, g;
    std::set<std::string> referring_keys;
    for (const auto& s : samples) {
      for (const auto& t : s.tasks) {
        if (t.task != TaskKind::Referring) continue;
        const auto key = detail::task_key(s.sample_id, t.task_id);
        referring_keys.insert(key);
        auto it = answers.find(key);
        if (it == answers.end()) fail(ErrorCode::IdMismatch, "no answer for referring task " + key);
        p.push_back(extract_types(it->second));
        g.emplace_back(t.answer.distortion_set.begin(), t.answer.distortion_set.end());
      }
    }
    for (const auto& [key, _] : answers) {
      if (!referring_keys.count(key)) fail(ErrorCode::IdMismatch, "answer " + key + " matches no referring task");
    }
    if (!p.empty()) {
      outcome.referring = referring_report(p, g);
      outcome.referring_items = p.size();
    }
  }

  if (cfg.scores) {
    std::vector<double> x, y;
    for (const auto& j : detail::read_jsonl(*cfg.scores, ErrorCode::IdMismatch)) {
      if (!j.contains("pred") || !j["pred"].is_number() || !j.contains("ref") || !j["ref"].is_number()) {
        fail(ErrorCode::IdMismatch, "score on line " + std::to_string(j["__line"].get<std::size_t>()) + " is incomplete");
      }
      x.push_back(j["pred"].get<double>());
      y.push_back(j["ref"].get<double>());
    }
    outcome.srcc_plcc = std::make_pair(srcc(x, y), plcc(x, y));
    outcome.scored_items = x.size();
  }

  std::string r = "spider-eval report\n[config]\n";
  r += fmt::format("manifest = {}\n", mpath.string());
  r += fmt::format("predictions = {}\n", cfg.predictions.string());
  for (const char* k : {"seed", "tau", "softmax", "logits", "segmenter", "oracle_assisted"}) {
    if (config_echo.contains(k)) {
      const auto& v = config_echo[k];
      r += fmt::format("{} = {}\n", k, v.is_string() ? v.get<std::string>() : v.dump());
    }
  }
  r += "miou_weighting = sample\n[grounding_miou]\n";
  for (const char* k : {"DAO-G", "HyD-G", "SiD-G"}) {
    auto it = outcome.miou.per_sub_task.find(k);
    if (it == outcome.miou.per_sub_task.end()) {
      r += fmt::format("{} = n/a (n=0)\n", k);
    } else {
      r += fmt::format("{} = {:.12f} (n={})\n", k, it->second, outcome.miou.counts.at(k));
    }
  }
  r += fmt::format("Average = {:.12f} (n={})\n", outcome.miou.average, outcome.miou.total);
  if (outcome.referring) {
    r += "[referring]\n";
    r += fmt::format("accuracy = {:.12f} (n={})\n", outcome.referring->accuracy, outcome.referring_items);
    for (const auto& [t, f1] : outcome.referring->f1) r += fmt::format("f1.{} = {:.12f}\n", type_name(t), f1);
  }
  if (outcome.srcc_plcc) {
    r += "[scoring]\n";
    r += fmt::format("srcc = {:.12f}\nplcc = {:.12f}\nn = {}\n", outcome.srcc_plcc->first, outcome.srcc_plcc->second,
                     outcome.scored_items);
  }
  outcome.report = r;
  if (!cfg.out.empty()) {
    if (cfg.out.has_parent_path()) fs::create_directories(cfg.out.parent_path());
    std::ofstream(cfg.out, std::ios::binary | std::ios::trunc) << r;
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// validate-ratings

inline constexpr std::array<std::string_view, 4> kVerificationDimensions = {"semantic", "spatial", "distortion",
                                                                            "linguistic"};

struct ValidateOutcome {
  std::vector<VerificationSummary> summaries;
  std::vector<std::string> missing_dimensions;
  std::map<std::string, std::optional<double>> icc_by_dimension;
  bool all_pass = false;
  std::string report;
};

/// Reads {"dimension", "ratings": [...]} lines, one per rated instance.
inline std::vector<RatingsMatrix> read_ratings(const std::filesystem::path& path) {
  std::map<std::string, RatingsMatrix> by_dim;
  for (const auto& j : detail::read_jsonl(path, ErrorCode::ConfigError)) {
    const auto line = std::to_string(j["__line"].get<std::size_t>());
    if (!j.contains("dimension") || !j["dimension"].is_string()) fail(ErrorCode::ConfigError, "line " + line + ": missing dimension");
    const auto dim = j["dimension"].get<std::string>();
    if (std::find(kVerificationDimensions.begin(), kVerificationDimensions.end(), dim) == kVerificationDimensions.end()) {
      fail(ErrorCode::ConfigError, "line " + line + ": unknown dimension '" + dim + "'");
    }
    if (!j.contains("ratings") || !j["ratings"].is_array() || j["ratings"].empty()) {
      fail(ErrorCode::ConfigError, "line " + line + ": ratings must be a non-empty array");
    }
    std::vector<int> row;
    for (const auto& v : j["ratings"]) {
      if (!v.is_number_integer() || v.get<int>() < 1 || v.get<int>() > 5) {
        fail(ErrorCode::ConfigError, "line " + line + ": ratings must be integers 1..5");
      }
      row.push_back(v.get<int>());
    }
    auto& m = by_dim[dim];
    m.dimension = dim;
    m.scores.push_back(std::move(row));
  }
  if (by_dim.empty()) fail(ErrorCode::ConfigError, path.string() + " holds no ratings");
  std::vector<RatingsMatrix> out;
  for (auto d : kVerificationDimensions) {
    auto it = by_dim.find(std::string(d));
    if (it != by_dim.end()) out.push_back(std::move(it->second));
  }
  return out;
}

inline ValidateOutcome run_validate(const std::filesystem::path& ratings_path) {
  ValidateOutcome o;
  const auto matrices = read_ratings(ratings_path);
  o.summaries = verification_summary(matrices);
  for (auto d : kVerificationDimensions) {
    const bool present = std::any_of(matrices.begin(), matrices.end(), [&](const auto& m) { return m.dimension == d; });
    if (!present) o.missing_dimensions.emplace_back(d);
  }
  for (const auto& m : matrices) {
    try {
      o.icc_by_dimension[m.dimension] = icc(m);
    } catch (const Error&) {
      o.icc_by_dimension[m.dimension] = std::nullopt;
    }
  }
  o.all_pass = o.missing_dimensions.empty() &&
               std::all_of(o.summaries.begin(), o.summaries.end(), [](const auto& s) { return s.pass; });

  std::string r = "spider-validate report\n";
  r += fmt::format("rule = share of instances with median rating >= 4 must exceed {:.2f}\n", kVerificationPassShare);
  for (const auto& s : o.summaries) {
    r += fmt::format("[{}]\ninstances = {}\nhistogram = {} {} {} {} {}\nproportion_4_or_5 = {:.6f}\npass = {}\n",
                     s.dimension, s.instances, s.histogram[0], s.histogram[1], s.histogram[2], s.histogram[3],
                     s.histogram[4], s.proportion_high, s.pass ? "true" : "false");
    const auto& v = o.icc_by_dimension[s.dimension];
    r += v ? fmt::format("icc21 = {:.6f}\n", *v) : std::string("icc21 = n/a\n");
  }
  for (const auto& d : o.missing_dimensions) r += fmt::format("[{}]\nmissing = true\npass = false\n", d);
  r += fmt::format("overall = {}\n", o.all_pass ? "pass" : "fail");
  o.report = r;
  return o;
}

}  // namespace spider
