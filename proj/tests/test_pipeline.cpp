#include "fgcltp/pipeline.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace fgcltp;
using namespace fgcltp::pipeline;

namespace {

std::string config_error_field(const io::json& j) {
  try {
    PipelineConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

PipelineConfig tiny_config() {
  PipelineConfig c = PipelineConfig::from_json({{"seed", 4},
                                                {"generator", {{"n", 60}}},
                                                {"training", {{"epochs", 1}, {"batch", 16}}},
                                                {"evaluation", {{"retrieval_pool", 8}, {"in_batch", 4}}}});
  return c;
}

std::vector<bool> skipped(const std::vector<StageOutcome>& out) {
  std::vector<bool> s;
  for (const auto& o : out) s.push_back(o.skipped);
  return s;
}

}  // namespace

TEST(PipelineConfig, DefaultsRoundTrip) {
  const PipelineConfig c;
  const io::json doc = c.to_json();
  EXPECT_EQ(PipelineConfig::from_json(doc).to_json(), doc);
  EXPECT_EQ(PipelineConfig::from_json(io::json::object()).to_json(), doc);
  for (const char* section : {"generator", "annotator", "tokenizer", "training", "evaluation", "policy"}) {
    EXPECT_TRUE(doc.contains(section)) << section;
  }
}

TEST(PipelineConfig, SeedPropagatesToStages) {
  const PipelineConfig c = PipelineConfig::from_json({{"seed", 17}});
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.training.seed, 17u);
  EXPECT_EQ(c.policy.train.seed, 17u);
}

TEST(PipelineConfig, ErrorsNameTheField) {
  EXPECT_EQ(config_error_field({{"bogus", 1}}), "bogus");
  EXPECT_EQ(config_error_field({{"training", {{"lrr", 0.1}}}}), "training.lrr");
  EXPECT_EQ(config_error_field({{"annotator", {{"typo", 0.1}}}}), "annotator.typo");
  EXPECT_EQ(config_error_field({{"training", {{"style", "plain"}}}}), "training.style");
  EXPECT_EQ(config_error_field({{"training", {{"lr", -1.0}}}}), "training");
  EXPECT_EQ(config_error_field({{"seed", -3}}), "seed");
  EXPECT_EQ(config_error_field({{"generator", 5}}), "generator");
  EXPECT_EQ(config_error_field({{"generator", {{"n", 0}}}}), "generator");
  EXPECT_EQ(config_error_field({{"tokenizer", {{"style", "fancy"}}}}), "tokenizer");
}

TEST(PipelineConfig, LoadReportsBadFiles) {
  testutil::TempDir dir("cfg");
  EXPECT_THROW(PipelineConfig::load(dir.path() / "absent.json"), ConfigError);
  io::write_text(dir.path() / "bad.json", "{ not json");
  EXPECT_THROW(PipelineConfig::load(dir.path() / "bad.json"), ConfigError);
  io::write_text(dir.path() / "ok.json", R"({"seed": 3, "tokenizer": {"style": "plain"}})");
  const PipelineConfig c = PipelineConfig::load(dir.path() / "ok.json");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.tokenizer.style, lang::Style::kPlain);
}

TEST(ParseStages, OrderAndErrors) {
  EXPECT_EQ(parse_stages("all"), kStages);
  EXPECT_EQ(parse_stages("eval,gen"), (std::vector<std::string>{"gen", "eval"}));
  EXPECT_EQ(parse_stages("train,train"), (std::vector<std::string>{"train"}));
  EXPECT_THROW(parse_stages("gen,bake"), ConfigError);
  EXPECT_THROW(parse_stages("gen,"), ConfigError);
}

TEST(DirectoryLock, ExclusiveAndReleased) {
  testutil::TempDir dir("lock");
  {
    DirectoryLock a(dir.path());
    EXPECT_TRUE(std::filesystem::exists(dir.path() / ".fgcltp.lock"));
    EXPECT_THROW(DirectoryLock b(dir.path()), LockError);
    EXPECT_THROW(run_pipeline(tiny_config(), {"gen"}, {dir.path()}, {.quiet = true}), LockError);
  }
  EXPECT_FALSE(std::filesystem::exists(dir.path() / ".fgcltp.lock"));
  EXPECT_NO_THROW(DirectoryLock c(dir.path()));
}

TEST(DirectoryLock, StaleLockIsReclaimed) {
  testutil::TempDir dir("stale");
  io::write_text(dir.path() / ".fgcltp.lock", "2147483000\n");
  EXPECT_NO_THROW(DirectoryLock a(dir.path()));
}

TEST(RunPipeline, MissingInputNamesProducer) {
  testutil::TempDir dir("missing");
  try {
    run_pipeline(tiny_config(), {"train"}, {dir.path()}, {.quiet = true});
    FAIL() << "expected MissingArtifact";
  } catch (const MissingArtifact& e) {
    EXPECT_EQ(e.needed(), "gen");
  }
  try {
    run_pipeline(tiny_config(), {"policy-eval"}, {dir.path()}, {.quiet = true});
    FAIL() << "expected MissingArtifact";
  } catch (const MissingArtifact& e) {
    EXPECT_EQ(e.needed(), "policy-train");
  }
}

TEST(RunPipeline, SkipsUpToDateStagesAndRerunsChangedOnes) {
  testutil::TempDir dir("run");
  const Layout L{dir.path()};
  PipelineConfig c = tiny_config();
  const std::vector<std::string> stages = parse_stages("gen,annotate,tokenize,train,eval");
  EXPECT_EQ(skipped(run_pipeline(c, stages, L, {.quiet = true})), std::vector<bool>(5, false));
  for (const auto& p : {L.labels(), L.annotations(), L.descriptions(), L.vocab(), L.checkpoint(), L.report(),
                        L.train_metrics(), L.manifest("eval")}) {
    EXPECT_TRUE(std::filesystem::exists(p)) << p;
  }
  const auto report = io::file_hash(L.report());
  EXPECT_EQ(skipped(run_pipeline(c, stages, L, {.quiet = true})), std::vector<bool>(5, true));

  // A changed evaluation setting reruns only eval.
  c.evaluation.ridge_lambda = 1e-2;
  EXPECT_EQ(skipped(run_pipeline(c, stages, L, {.quiet = true})),
            (std::vector<bool>{true, true, true, true, false}));

  // A modified output invalidates that stage.
  io::write_text(L.annotations(), "");
  EXPECT_FALSE(run_pipeline(c, {"annotate"}, L, {.quiet = true})[0].skipped);

  // Forcing reruns everything and reproduces the same bytes.
  c.evaluation.ridge_lambda = eval::EvalConfig{}.ridge_lambda;
  run_pipeline(c, stages, L, {.quiet = true, .force = true});
  EXPECT_EQ(io::file_hash(L.report()), report);
}
