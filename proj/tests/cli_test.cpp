#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spider/cli.hpp"

using namespace spider;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "spider");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {rc, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("spider_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary | std::ios::trunc) << text; }

RegionMask rows_mask(Dims d, std::initializer_list<int> idx) {
  RegionMask m(d);
  for (int i : idx) m.set(i % d.width, i / d.width);
  return m;
}

}  // namespace

TEST(CliForge, DeterministicAcrossRunsAndWorkers) {
  const auto d = scratch("det");
  ASSERT_EQ(cli({"forge", "--seed", "7", "--count", "6", "--out", (d / "a").string(), "--no-images"}).rc, 0);
  ASSERT_EQ(cli({"forge", "--seed", "7", "--count", "6", "--out", (d / "b").string(), "--no-images"}).rc, 0);
  ASSERT_EQ(cli({"forge", "--seed", "7", "--count", "6", "--out", (d / "c").string(), "--no-images", "--workers", "4"}).rc,
            0);
  const auto a = slurp(d / "a" / "manifest.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(d / "b" / "manifest.jsonl"));
  EXPECT_EQ(a, slurp(d / "c" / "manifest.jsonl"));
  EXPECT_NE(a, (cli({"forge", "--seed", "8", "--count", "6", "--out", (d / "e").string(), "--no-images"}),
                slurp(d / "e" / "manifest.jsonl")));
}

TEST(CliForge, GoldenManifest) {
  const auto d = scratch("golden");
  const auto r = cli({"forge", "--seed", "7", "--count", "4", "--out", d.string(), "--no-images"});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(slurp(d / "manifest.jsonl"), slurp(fs::path(SPIDER_TEST_DATA) / "golden" / "seed7_count4.manifest.jsonl"));
}

TEST(CliForge, PrintsStatisticsAndEchoesConfig) {
  const auto d = scratch("stats");
  const auto r = cli({"forge", "--count", "3", "--out", d.string()});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_NE(r.out.find("Global Des."), std::string::npos);
  EXPECT_NE(r.out.find("Ref-long"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "images" / "s000002.png"));
  const auto echo = nlohmann::json::parse(slurp(d / "forge_config.json"));
  EXPECT_EQ(echo["count"], 3);
  EXPECT_EQ(echo["seed"], 7);
}

TEST(CliForge, ConfigErrorsExitTwo) {
  const auto d = scratch("bad");
  EXPECT_EQ(cli({"forge", "--count", "0", "--out", d.string()}).rc, 2);
  EXPECT_EQ(cli({"forge", "--count", "2"}).rc, 2);
  EXPECT_EQ(cli({"forge", "--count", "2", "--out", d.string(), "--workers", "0"}).rc, 2);
  EXPECT_EQ(cli({"forge", "--bogus"}).rc, 2);
  EXPECT_EQ(cli({}).rc, 2);
  EXPECT_EQ(cli({"--help"}).rc, 0);
}

TEST(CliForge, FlagsBeatConfigFileBeatsDefaults) {
  const auto d = scratch("config");
  write(d / "run.toml", "[forge]\ncount = 2\nseed = 9\nout = \"" + (d / "from_config").string() + "\"\n");
  ASSERT_EQ(cli({"--config", (d / "run.toml").string(), "forge", "--no-images"}).rc, 0);
  auto echo = nlohmann::json::parse(slurp(d / "from_config" / "forge_config.json"));
  EXPECT_EQ(echo["count"], 2);
  EXPECT_EQ(echo["seed"], 9);
  ASSERT_EQ(cli({"--config", (d / "run.toml").string(), "forge", "--no-images", "--count", "3"}).rc, 0);
  echo = nlohmann::json::parse(slurp(d / "from_config" / "forge_config.json"));
  EXPECT_EQ(echo["count"], 3);
}

TEST(CliForge, EnvironmentOverridesOutDir) {
  const auto d = scratch("env");
  ::setenv("SPIDER_OUT_DIR", (d / "env_out").string().c_str(), 1);
  ::setenv("SPIDER_WORKERS", "2", 1);
  const auto r = cli({"forge", "--count", "2", "--no-images"});
  ::unsetenv("SPIDER_OUT_DIR");
  ::unsetenv("SPIDER_WORKERS");
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "env_out" / "manifest.jsonl"));
}

TEST(CliGround, OracleClosedLoopScoresOne) {
  const auto d = scratch("loop");
  ASSERT_EQ(cli({"forge", "--count", "12", "--out", d.string(), "--no-images", "--uniform-fraction", "0.3"}).rc, 0);
  const auto g = cli({"ground", "--manifest", d.string(), "--oracle-logits", "--segmenter", "oracle", "--out",
                      (d / "pred.jsonl").string()});
  ASSERT_EQ(g.rc, 0) << g.err;
  EXPECT_NE(g.out.find("failures=0"), std::string::npos);
  const auto e = cli({"eval", "--manifest", d.string(), "--predictions", (d / "pred.jsonl").string()});
  ASSERT_EQ(e.rc, 0) << e.err;
  EXPECT_NE(e.out.find("Average = 1.000000000000"), std::string::npos) << e.out;
  EXPECT_NE(e.out.find("segmenter = oracle"), std::string::npos);
}

TEST(CliGround, GlobalScopeSkipsTheSegmenter) {
  const auto d = scratch("skip");
  ASSERT_EQ(cli({"forge", "--count", "3", "--out", d.string(), "--no-images", "--uniform-fraction", "1",
                 "--task-mix", "0", "0", "1", "0", "0"})
                .rc,
            0);
  // A peer that cannot start proves no segmenter call happens.
  const auto g = cli({"ground", "--manifest", d.string(), "--oracle-logits", "--segmenter", "external", "--peer",
                      "exit 3", "--out", (d / "pred.jsonl").string()});
  ASSERT_EQ(g.rc, 0) << g.err;
  EXPECT_NE(g.out.find("segmenter_calls=0"), std::string::npos) << g.out;
  std::ifstream in(d / "pred.jsonl");
  std::string line;
  std::getline(in, line);
  int preds = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["decision"], "skip");
    EXPECT_EQ(j["rle"].size(), 2u);  // one zero run, then the whole frame
    ++preds;
  }
  EXPECT_EQ(preds, 12);
}

TEST(CliGround, LogitIntakeErrors) {
  const auto d = scratch("logits");
  ASSERT_EQ(cli({"forge", "--count", "2", "--out", d.string(), "--no-images", "--uniform-fraction", "0", "--task-mix",
                 "0", "0", "1", "0", "0"})
                .rc,
            0);
  write(d / "bad.jsonl",
        "{\"sample_id\":\"s000000\",\"task_id\":0,\"chi\":{\"left\":0,\"right\":0,\"top\":0,\"bottom\":0},"
        "\"region_scope\":\"local\"}\n{\"sample_id\":\"s000000\",\"task_id\":1,\"chi\":{\"left\":0}}\n");
  auto r = cli({"ground", "--manifest", d.string(), "--logits", (d / "bad.jsonl").string(), "--out",
                (d / "p.jsonl").string()});
  EXPECT_EQ(r.rc, 4);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;

  write(d / "partial.jsonl",
        "{\"sample_id\":\"s000000\",\"task_id\":0,\"chi\":{\"left\":0,\"right\":0,\"top\":0,\"bottom\":0},"
        "\"region_scope\":\"local\"}\n");
  r = cli({"ground", "--manifest", d.string(), "--logits", (d / "partial.jsonl").string(), "--out",
           (d / "p.jsonl").string()});
  EXPECT_EQ(r.rc, 4);
  EXPECT_NE(r.err.find("MissingLogits"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"ground", "--manifest", d.string(), "--out", (d / "p.jsonl").string()}).rc, 2);
}

TEST(CliGround, ShardedRunsMatch) {
  const auto d = scratch("shard");
  ASSERT_EQ(cli({"forge", "--count", "8", "--out", d.string(), "--no-images"}).rc, 0);
  for (const char* w : {"1", "5"}) {
    ASSERT_EQ(cli({"ground", "--manifest", d.string(), "--oracle-logits", "--segmenter", "external", "--peer",
                   SPIDER_STUB_PEER, "--workers", w, "--out", (d / (std::string("p") + w + ".jsonl")).string()})
                  .rc,
              0);
  }
  EXPECT_EQ(slurp(d / "p1.jsonl"), slurp(d / "p5.jsonl"));
}

TEST(CliEval, MissingPredictionNamesTheId) {
  const auto d = scratch("missing");
  ASSERT_EQ(cli({"forge", "--count", "3", "--out", d.string(), "--no-images"}).rc, 0);
  ASSERT_EQ(cli({"ground", "--manifest", d.string(), "--oracle-logits", "--out", (d / "p.jsonl").string()}).rc, 0);
  std::ifstream in(d / "p.jsonl");
  std::string header, dropped, line, rest;
  std::getline(in, header);
  std::getline(in, dropped);
  while (std::getline(in, line)) rest += line + "\n";
  write(d / "p.jsonl", header + "\n" + rest);
  const auto j = nlohmann::json::parse(dropped);
  const std::string id = j["sample_id"].get<std::string>() + "/" + std::to_string(j["task_id"].get<int>());
  const auto r = cli({"eval", "--manifest", d.string(), "--predictions", (d / "p.jsonl").string()});
  EXPECT_EQ(r.rc, 5);
  EXPECT_NE(r.err.find(id), std::string::npos) << r.err;
}

TEST(CliEval, HandBuiltSixPredictionFixture) {
  const auto d = scratch("six");
  const Dims dims{4, 4};
  const auto a = rows_mask(dims, {0, 1, 2, 3, 4, 5, 6, 7});
  const auto b = rows_mask(dims, {8, 9, 12, 13});
  std::vector<SampleRecord> samples;
  for (const char* id : {"h1", "h2"}) {
    SampleRecord s;
    s.sample_id = id;
    s.image_path = std::string("images/") + id + ".png";
    s.dims = dims;
    s.regions = {{1, a, "sky", {{{DistortionType::Blur, 3, 0}}}},
                 {2, b, "dog", {{{DistortionType::Noise, 1, 5}}}}};
    samples.push_back(std::move(s));
  }
  const auto task = [](int id, SubTask st, int target) {
    TaskRecord t;
    t.task_id = id;
    t.task = TaskKind::Grounding;
    t.sub_task = st;
    t.question = "q";
    t.target_region_id = target;
    GroundingQuery q;
    q.sub_task = st;
    if (st == SubTask::SingleIntensity) q.type = DistortionType::Blur;
    if (st == SubTask::AccumulationOrder) q.types = {DistortionType::Blur};
    t.query = q;
    t.answer.region_scope = RegionScope::Local;
    return t;
  };
  samples[0].tasks = {task(0, SubTask::HybridIntensity, 1), task(1, SubTask::HybridIntensity, 1),
                      task(2, SubTask::SingleIntensity, 2)};
  samples[1].tasks = {task(0, SubTask::SingleIntensity, 2), task(1, SubTask::AccumulationOrder, 1),
                      task(2, SubTask::AccumulationOrder, 2)};
  write_manifest(samples, d);
  // IoU by hand: 8/8, 4/8, 0/12, 4/16, 4/12, 0/4.
  const auto pred = [](const char* s, int t, const char* rle) {
    return std::string("{\"kind\":\"prediction\",\"sample_id\":\"") + s + "\",\"task_id\":" + std::to_string(t) +
           ",\"width\":4,\"height\":4,\"rle\":" + rle + "}\n";
  };
  write(d / "p.jsonl", pred("h1", 0, "[0,8,8]") + pred("h1", 1, "[0,4,12]") + pred("h1", 2, "[0,4,12]") +
                           pred("h2", 0, "[0,16]") + pred("h2", 1, "[4,8,4]") + pred("h2", 2, "[16]"));
  const auto r = cli({"eval", "--manifest", d.string(), "--predictions", (d / "p.jsonl").string(), "--out",
                      (d / "report.txt").string()});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_NE(r.out.find("HyD-G = 0.750000000000 (n=2)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("SiD-G = 0.125000000000 (n=2)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("DAO-G = 0.166666666667 (n=2)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Average = 0.347222222222 (n=6)"), std::string::npos) << r.out;
  EXPECT_EQ(slurp(d / "report.txt"), r.out);

  write(d / "extra.jsonl", slurp(d / "p.jsonl") + pred("h9", 0, "[16]"));
  EXPECT_EQ(cli({"eval", "--manifest", d.string(), "--predictions", (d / "extra.jsonl").string()}).rc, 5);
}

TEST(CliEval, ReferringAnswersAndScores) {
  const auto d = scratch("ref");
  ASSERT_EQ(cli({"forge", "--count", "4", "--out", d.string(), "--no-images"}).rc, 0);
  ASSERT_EQ(cli({"ground", "--manifest", d.string(), "--oracle-logits", "--out", (d / "p.jsonl").string()}).rc, 0);
  std::string answers;
  for (const auto& s : read_manifest(d))
    for (const auto& t : s.tasks)
      if (t.task == TaskKind::Referring) {
        nlohmann::json j = {{"sample_id", s.sample_id}, {"task_id", t.task_id}, {"answer_text", t.answer.body}};
        answers += j.dump() + "\n";
      }
  write(d / "answers.jsonl", answers);
  write(d / "scores.jsonl", "{\"pred\":1,\"ref\":2}\n{\"pred\":2,\"ref\":3}\n{\"pred\":3,\"ref\":3.5}\n");
  const auto r = cli({"eval", "--manifest", d.string(), "--predictions", (d / "p.jsonl").string(), "--answers",
                      (d / "answers.jsonl").string(), "--scores", (d / "scores.jsonl").string()});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_NE(r.out.find("accuracy = 1.000000000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("srcc = 1.000000000000"), std::string::npos) << r.out;
}

TEST(CliValidate, PassFailAndMalformed) {
  const auto d = scratch("validate");
  std::string all5;
  for (const char* dim : {"semantic", "spatial", "distortion", "linguistic"})
    for (int i = 0; i < 3; ++i) all5 += std::string("{\"dimension\":\"") + dim + "\",\"ratings\":[5,5,5]}\n";
  write(d / "all5.jsonl", all5);
  EXPECT_EQ(cli({"validate-ratings", "--ratings", (d / "all5.jsonl").string()}).rc, 0);

  std::string boundary;
  for (const char* dim : {"semantic", "spatial", "distortion"})
    boundary += std::string("{\"dimension\":\"") + dim + "\",\"ratings\":[5,5,5]}\n";
  for (const char* r : {"[4,4,5]", "[5,4,4]", "[4,4,4]", "[5,5,5]", "[3,3,4]"})
    boundary += std::string("{\"dimension\":\"linguistic\",\"ratings\":") + r + "}\n";
  write(d / "boundary.jsonl", boundary);
  const auto r = cli({"validate-ratings", "--ratings", (d / "boundary.jsonl").string()});
  EXPECT_EQ(r.rc, 6);
  EXPECT_NE(r.out.find("[linguistic]\ninstances = 5\nhistogram = 0 0 1 3 1\nproportion_4_or_5 = 0.800000\npass = false"),
            std::string::npos)
      << r.out;

  write(d / "missing.jsonl", "{\"dimension\":\"semantic\",\"ratings\":[5,5]}\n");
  EXPECT_EQ(cli({"validate-ratings", "--ratings", (d / "missing.jsonl").string()}).rc, 6);
  write(d / "empty.jsonl", "");
  EXPECT_EQ(cli({"validate-ratings", "--ratings", (d / "empty.jsonl").string()}).rc, 2);
  write(d / "bad.jsonl", "{\"dimension\":\"semantic\",\"ratings\":[7]}\n");
  EXPECT_EQ(cli({"validate-ratings", "--ratings", (d / "bad.jsonl").string()}).rc, 2);
  write(d / "junk.jsonl", "semantic 5 5 5\n");
  EXPECT_EQ(cli({"validate-ratings", "--ratings", (d / "junk.jsonl").string()}).rc, 2);
}
