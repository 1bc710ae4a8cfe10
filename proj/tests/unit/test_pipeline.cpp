#include <gtest/gtest.h>

#include <fstream>

#include "lpf/pipeline.hpp"
#include "../support/e2e_fixture.hpp"
#include "../support/test_util.hpp"

using namespace lpf;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  GenerateSummary gen;
  ScoreSummary score;
  ReportSummary report;
};

RunResult run_e2e(const fs::path& fixture, const fs::path& out) {
  ConfigOverrides o;
  o.out = out.string();
  Workspace ws(load_config(fixture / "run.toml", o));
  RunResult r;
  r.gen = cmd_generate(ws);
  r.score = cmd_score(ws);
  r.report = cmd_evaluate(ws);
  return r;
}

// Copies the shipped fixture to <root>/tests/fixtures/e2e so its relative
// data paths resolve through a <root>/data symlink.
fs::path stage_fixture(const fs::path& root) {
  const auto dir = root / "tests/fixtures/e2e";
  fs::create_directories(dir.parent_path());
  fs::copy(testkit::fixture_dir(), dir, fs::copy_options::recursive);
  fs::create_directory_symlink(testkit::data_dir(), root / "data");
  return dir;
}

std::map<std::string, std::string> report_texts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (ext == ".md" || ext == ".csv") out[e.path().filename().string()] = testkit::slurp(e.path());
  }
  return out;
}

class EndToEnd : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tmp_ = new testkit::TempDir("e2e");
    result_ = new RunResult(run_e2e(testkit::fixture_dir(), tmp_->path()));
  }
  static void TearDownTestSuite() {
    delete result_;
    delete tmp_;
  }
  static testkit::TempDir* tmp_;
  static RunResult* result_;
};

testkit::TempDir* EndToEnd::tmp_ = nullptr;
RunResult* EndToEnd::result_ = nullptr;

}  // namespace

TEST_F(EndToEnd, ReplayRunProducesExpectedCounts) {
  const auto& r = *result_;
  EXPECT_EQ(r.gen.cells, 1296u);
  EXPECT_EQ(r.gen.generated, 1128u);
  EXPECT_EQ(r.gen.failed, 168u);  // unsupported or unmappable combinations
  EXPECT_EQ(r.gen.already_done, 0u);
  EXPECT_EQ(r.score.scored, 1127u);
  EXPECT_EQ(r.score.failed, 1u);  // the one empty few-shot output
}

TEST_F(EndToEnd, ReportArtifactsExist) {
  const auto dir = result_->report.dir;
  for (const char* f : {"sentiment_results.md", "sentiment_results.csv", "topic_results.md", "keywords_results.md",
                        "multiple_results.md", "sentiment_avg_vs_mv.md", "sentiment_ppl_vs_slor.md",
                        "correlations.md", "efficiency_time.md", "efficiency_memory.md", "aggregates.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto md = testkit::slurp(dir / "sentiment_results.md");
  EXPECT_NE(md.find("## Results: sentiment control"), std::string::npos);
  EXPECT_NE(md.find("| Prior CTG |"), std::string::npos);
  EXPECT_NE(md.find(" ZS |"), std::string::npos);
  EXPECT_FALSE(result_->report.artifacts.empty());
}

TEST_F(EndToEnd, ResumeSkipsCompletedWork) {
  ConfigOverrides o;
  o.out = tmp_->path().string();
  Workspace ws(load_config(testkit::fixture_dir() / "run.toml", o));
  const auto g = cmd_generate(ws);
  EXPECT_EQ(g.generated, 0u);
  EXPECT_EQ(g.already_done, result_->gen.generated + result_->gen.failed);
  EXPECT_EQ(g.network_calls, 0u);
  const auto s = cmd_score(ws);
  EXPECT_EQ(s.scored, 0u);
  EXPECT_EQ(s.already_done, result_->score.scored + result_->score.failed);
}

TEST_F(EndToEnd, SecondRunIsByteIdentical) {
  testkit::TempDir other("e2e-again");
  const auto again = run_e2e(testkit::fixture_dir(), other.path());
  const auto a = report_texts(result_->report.dir);
  const auto b = report_texts(again.report.dir);
  ASSERT_FALSE(a.empty());
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, text] : a) EXPECT_EQ(text, b.at(name)) << name;
}

TEST_F(EndToEnd, ReportRegeneratesFromMetricsAlone) {
  ConfigOverrides o;
  o.out = tmp_->path().string();
  Workspace ws(load_config(testkit::fixture_dir() / "run.toml", o));
  const auto before = report_texts(result_->report.dir);
  const auto rep = cmd_report(ws);
  EXPECT_EQ(report_texts(rep.dir), before);
}

TEST_F(EndToEnd, CompareOriginalUsesRunMetrics) {
  ConfigOverrides o;
  o.out = tmp_->path().string();
  Workspace ws(load_config(testkit::fixture_dir() / "run.toml", o));
  const auto metrics = read_metric_cells(ws.config().metrics_path());
  testkit::TempDir out("cmp");
  const auto rep = cmd_compare_original(testkit::data_dir() / "originals/originals.csv", out.path(), &metrics,
                                        detail::report_context(ws));
  EXPECT_EQ(rep.rows.size(), 8u);
  EXPECT_TRUE(fs::exists(out / "compare_original.md"));
}

TEST(Fixture, RegenerationMatchesShippedFiles) {
  testkit::TempDir tmp("regen");
  fs::create_directory_symlink(testkit::data_dir(), tmp / "data");
  const auto dir = tmp / "tests/fixtures/e2e";
  fixture::write_e2e(dir);
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(testkit::fixture_dir())) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), testkit::fixture_dir());
    ASSERT_TRUE(fs::exists(dir / rel)) << rel;
    EXPECT_EQ(testkit::slurp(dir / rel), testkit::slurp(e.path())) << rel;
    ++compared;
  }
  EXPECT_GE(compared, 8u);
}

TEST(PipelineFailures, MissingReplayRecordIsReported) {
  testkit::TempDir tmp("missing");
  const auto dir = stage_fixture(tmp.path());
  // Drop the first classify record.
  auto lines = testkit::slurp(dir / "replay/classify.jsonl");
  const auto first = lines.substr(0, lines.find('\n') + 1);
  testkit::spit(dir / "replay/classify.jsonl", lines.substr(first.size()));
  const auto key = nlohmann::json::parse(first)["key"].get<std::string>();

  ConfigOverrides o;
  o.out = (tmp / "out").string();
  Workspace ws(load_config(dir / "run.toml", o));
  cmd_generate(ws);
  try {
    cmd_score(ws);
    FAIL() << "expected MissingRecord";
  } catch (const MissingRecord& e) {
    EXPECT_NE(std::string(e.what()).find(key), std::string::npos);
  }
}

TEST(PipelineFailures, MissingReplayDirectory) {
  testkit::TempDir tmp("noreplay");
  const auto dir = stage_fixture(tmp.path());
  fs::remove_all(dir / "replay");
  ConfigOverrides o;
  o.out = (tmp / "out").string();
  EXPECT_THROW(
      {
        Workspace ws(load_config(dir / "run.toml", o));
        cmd_generate(ws);
      },
      ConfigError);
}

TEST(PipelineFailures, UnknownTechniqueIsAConfigError) {
  testkit::TempDir tmp("unknown");
  const auto dir = stage_fixture(tmp.path());
  auto toml = testkit::slurp(dir / "run.toml");
  toml.replace(toml.find("\"bolt\""), 6, "\"nope\"");
  testkit::spit(dir / "run.toml", toml);
  EXPECT_THROW(Workspace(load_config(dir / "run.toml")), ConfigError);
}

TEST(PipelineFailures, ScoreBeforeGenerate) {
  testkit::TempDir tmp("order");
  ConfigOverrides o;
  o.out = tmp.path().string();
  Workspace ws(load_config(testkit::fixture_dir() / "run.toml", o));
  EXPECT_THROW(cmd_score(ws), PreconditionError);
  EXPECT_THROW(cmd_report(ws), PreconditionError);
}

TEST(Benchmark, ReplayedYelpPredictions) {
  testkit::TempDir tmp("bench");
  const auto file = tmp / "yelp_test.tsv";
  fs::create_directories(tmp / "replay");
  std::ofstream tsv(file, std::ios::binary);
  std::ofstream replay(tmp / "replay/classify.jsonl", std::ios::binary);
  std::size_t index = 0;
  const auto add = [&](const char* gold, const char* pred, int n) {
    for (int i = 0; i < n; ++i, ++index) {
      tsv << gold << "\treview number " << index << "\n";
      const double p = std::string(pred) == "positive" ? 0.9 : 0.1;
      const nlohmann::json rec{{"kind", "classify"},
                               {"model_id", "t5_sentiment"},
                               {"key", benchmark_record_key(file, index)},
                               {"labels", {{"positive", p}, {"negative", 1 - p}}}};
      replay << rec.dump() << "\n";
    }
  };
  add("positive", "positive", 18420);
  add("positive", "negative", 580);
  add("negative", "positive", 1254);
  add("negative", "negative", 17746);
  tsv.close();
  replay.close();

  ReplayBackend backend(tmp / "replay");
  ScoringClient client(backend);
  BenchmarkRequest req{file, {"t5_sentiment", Attribute::Sentiment, VerdictStyle::Distribution}, "positive", 500};
  const auto m = cmd_classifier_benchmark(req, client, tmp / "out");
  EXPECT_EQ(m.n, 38000u);
  EXPECT_NEAR(m.accuracy, 95.17, 0.005);
  EXPECT_NEAR(m.f1, 95.26, 0.005);
  EXPECT_NEAR(m.precision, 93.63, 0.005);
  EXPECT_NEAR(m.recall, 96.95, 0.005);
  const auto md = testkit::slurp(tmp / "out/classifier_benchmark_t5_sentiment.md");
  EXPECT_NE(md.find("| t5_sentiment | yelp_test | 95.17 | 95.26 | 93.63 | 96.95 | 38000 |"), std::string::npos);
}

TEST(Benchmark, MalformedFileIsALoadError) {
  testkit::TempDir tmp("bench");
  testkit::spit(tmp / "b.tsv", "positive no tab here\n");
  fs::create_directories(tmp / "replay");
  ReplayBackend backend(tmp / "replay");
  ScoringClient client(backend);
  BenchmarkRequest req{tmp / "b.tsv", {"c", Attribute::Sentiment, VerdictStyle::Distribution}, std::nullopt, 8};
  EXPECT_THROW(cmd_classifier_benchmark(req, client, tmp / "out"), LoadError);
  req.benchmark_file = tmp / "absent.tsv";
  EXPECT_THROW(cmd_classifier_benchmark(req, client, tmp / "out"), LoadError);
}
