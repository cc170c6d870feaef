#pragma once

// Command-line front end. Kept in the library so tests can drive it in-process.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "spider/pipeline.hpp"

namespace spider {

namespace detail {

inline bool flag_given(int argc, const char* const* argv, std::string_view flag) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == flag || (a.size() > flag.size() && a.substr(0, flag.size()) == flag && a[flag.size()] == '=')) return true;
  }
  return false;
}

inline int exit_for(const Error& e, int fallback) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
      return kExitConfig;
    default:
      return fallback;
  }
}

}  // namespace detail

/// Runs one command; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Distortion-aware instruction data forge and grounding harness", "spider"};
  app.set_config("--config", "", "TOML/INI file with per-command sections");
  app.require_subcommand(1);

  // forge
  ForgeRun frun;
  std::string mask_format = "rle";
  std::string regions_dir;
  bool no_images = false;
  std::vector<double> task_mix(frun.forge.mix.weights.begin(), frun.forge.mix.weights.end());
  std::vector<double> grounding_split(frun.forge.mix.grounding_split.begin(), frun.forge.mix.grounding_split.end());
  std::string forge_out;
  auto* forge = app.add_subcommand("forge", "Generate a seeded instruction manifest");
  forge->add_option("--seed", frun.forge.seed, "Run seed")->capture_default_str();
  forge->add_option("--count", frun.forge.count, "Number of samples")->capture_default_str();
  forge->add_option("--width", frun.forge.dims.width, "Frame width")->capture_default_str();
  forge->add_option("--height", frun.forge.dims.height, "Frame height")->capture_default_str();
  forge->add_option("--tasks-per-sample", frun.forge.tasks_per_sample)->capture_default_str();
  forge->add_option("--min-regions", frun.forge.min_regions)->capture_default_str();
  forge->add_option("--max-regions", frun.forge.max_regions)->capture_default_str();
  forge->add_option("--uniform-fraction", frun.forge.uniform_fraction)->capture_default_str();
  forge->add_option("--task-mix", task_mix, "Weights: global, local, grounding, ref-short, ref-long")->expected(5);
  forge->add_option("--grounding-split", grounding_split, "Weights: HyD-G, SiD-G, DAO-G")->expected(3);
  forge->add_option("--regions", regions_dir, "Directory of <name>.png masks with <name>.txt labels");
  forge->add_option("--mask-format", mask_format)->check(CLI::IsMember({"rle", "png"}))->capture_default_str();
  forge->add_flag("--no-images", no_images, "Skip rendering image files");
  forge->add_option("--out", forge_out, "Output directory (env SPIDER_OUT_DIR)");
  forge->add_option("--workers", frun.workers, "Worker threads (env SPIDER_WORKERS)")->capture_default_str();

  // ground
  GroundConfig gcfg;
  std::string logits_path;
  std::string softmax_mode = "temperature";
  std::string segmenter = "oracle";
  std::string ground_out;
  auto* ground = app.add_subcommand("ground", "Map term logits to points and segment");
  ground->add_option("--manifest", gcfg.manifest, "Manifest file or directory")->required();
  ground->add_option("--logits", logits_path, "Logit intake JSONL");
  ground->add_flag("--oracle-logits", gcfg.oracle_logits, "Synthesize logits from ground truth");
  ground->add_option("--tau", gcfg.tau)->capture_default_str();
  ground->add_option("--softmax-mode", softmax_mode)
      ->check(CLI::IsMember({"temperature", "as-printed"}))
      ->capture_default_str();
  ground->add_option("--segmenter", segmenter)->check(CLI::IsMember({"oracle", "flood", "external"}))->capture_default_str();
  ground->add_option("--peer", gcfg.peer_command, "Shell command of the external segmenter");
  ground->add_option("--color-tol", gcfg.color_tol)->capture_default_str();
  ground->add_option("--out", ground_out, "Predictions file (env SPIDER_OUT_DIR: <dir>/predictions.jsonl)");
  ground->add_option("--workers", gcfg.workers)->capture_default_str();

  // eval
  EvalConfig ecfg;
  std::string answers, scores, eval_out;
  auto* eval = app.add_subcommand("eval", "Score predictions against a manifest");
  eval->add_option("--manifest", ecfg.manifest)->required();
  eval->add_option("--predictions", ecfg.predictions)->required();
  eval->add_option("--answers", answers, "Referring answers JSONL");
  eval->add_option("--scores", scores, "Paired quality scores JSONL");
  eval->add_option("--out", eval_out, "Report file (env SPIDER_OUT_DIR: <dir>/report.txt)");

  // validate-ratings
  std::string ratings, validate_out;
  auto* validate = app.add_subcommand("validate-ratings", "Aggregate human verification ratings");
  validate->add_option("--ratings", ratings)->required();
  validate->add_option("--out", validate_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  const char* env_out = std::getenv("SPIDER_OUT_DIR");
  const char* env_workers = std::getenv("SPIDER_WORKERS");
  const auto env_worker_count = [&](int& target) -> bool {
    if (!env_workers || detail::flag_given(argc, argv, "--workers")) return true;
    try {
      std::size_t used = 0;
      target = std::stoi(env_workers, &used);
      return used == std::string_view(env_workers).size();
    } catch (const std::exception&) {
      return false;
    }
  };
  const bool out_flag = detail::flag_given(argc, argv, "--out");

  if (*forge) {
    try {
      if (!env_worker_count(frun.workers)) fail(ErrorCode::ConfigError, "SPIDER_WORKERS is not an integer");
      if (env_out && !out_flag) forge_out = env_out;
      if (forge_out.empty()) fail(ErrorCode::ConfigError, "--out is required");
      frun.out_dir = forge_out;
      std::copy(task_mix.begin(), task_mix.end(), frun.forge.mix.weights.begin());
      std::copy(grounding_split.begin(), grounding_split.end(), frun.forge.mix.grounding_split.begin());
      frun.mask_format = mask_format == "png" ? MaskFormat::Png : MaskFormat::InlineRle;
      frun.write_images = !no_images;
      validate_forge_config(frun);
      if (!regions_dir.empty()) frun.forge.external_regions = load_external_regions(regions_dir);
      const auto summary = run_forge(frun);
      out << format_task_statistics(summary);
      out << "manifest: " << summary.manifest.string() << '\n';
      return kExitOk;
    } catch (const Error& e) {
      err << "forge: " << e.what() << '\n';
      return detail::exit_for(e, kExitForge);
    }
  }

  if (*ground) {
    try {
      if (!env_worker_count(gcfg.workers)) fail(ErrorCode::ConfigError, "SPIDER_WORKERS is not an integer");
      if (env_out && !out_flag) ground_out = (std::filesystem::path(env_out) / "predictions.jsonl").string();
      if (ground_out.empty()) fail(ErrorCode::ConfigError, "--out is required");
      gcfg.out = ground_out;
      if (!logits_path.empty()) gcfg.logits = logits_path;
      if (gcfg.logits && gcfg.oracle_logits) fail(ErrorCode::ConfigError, "--logits and --oracle-logits are exclusive");
      gcfg.softmax = softmax_mode == "as-printed" ? SoftmaxMode::AsPrinted : SoftmaxMode::Temperature;
      gcfg.segmenter = segmenter == "flood"      ? SegmenterKind::FloodFill
                       : segmenter == "external" ? SegmenterKind::External
                                                 : SegmenterKind::Oracle;
      if (gcfg.logits && !std::filesystem::exists(*gcfg.logits)) {
        fail(ErrorCode::ConfigError, "logits file " + gcfg.logits->string() + " not found");
      }
      const auto outcome = run_ground(gcfg);
      out << fmt::format("predictions={} skipped={} segmenter_calls={} failures={}\n", outcome.predictions,
                         outcome.skipped, outcome.segmenter_calls, outcome.failures.size());
      for (const auto& [key, msg] : outcome.failures) err << "ground: " << key << ": " << msg << '\n';
      return outcome.failures.empty() ? kExitOk : kExitGround;
    } catch (const Error& e) {
      err << "ground: " << e.what() << '\n';
      return detail::exit_for(e, kExitGround);
    }
  }

  if (*eval) {
    try {
      if (env_out && !out_flag) eval_out = (std::filesystem::path(env_out) / "report.txt").string();
      ecfg.out = eval_out;
      if (!answers.empty()) ecfg.answers = answers;
      if (!scores.empty()) ecfg.scores = scores;
      const auto outcome = run_eval(ecfg);
      out << outcome.report;
      return kExitOk;
    } catch (const Error& e) {
      err << "eval: " << e.what() << '\n';
      return detail::exit_for(e, kExitEval);
    }
  }

  try {
    const auto outcome = run_validate(ratings);
    out << outcome.report;
    if (!validate_out.empty()) std::ofstream(validate_out, std::ios::binary | std::ios::trunc) << outcome.report;
    return outcome.all_pass ? kExitOk : kExitValidateFail;
  } catch (const Error& e) {
    err << "validate-ratings: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace spider
