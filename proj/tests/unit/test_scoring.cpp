#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "lpf/lemmas.hpp"
#include "lpf/metrics.hpp"
#include "lpf/records.hpp"
#include "lpf/scoring.hpp"
#include "../support/test_util.hpp"

using namespace lpf;
using lpf::testkit::TempDir;
using lpf::testkit::spit;

namespace {

const ClassifierSpec kSent{"sent", Attribute::Sentiment, VerdictStyle::Distribution};
const ClassifierSpec kTopic{"topic", Attribute::Topic, VerdictStyle::Distribution};
const ClassifierSpec kBinary{"bin", Attribute::Topic, VerdictStyle::PerTopicBinary};

/// Backend double answering from fixed tables and counting calls.
class FakeBackend : public Backend {
 public:
  std::vector<LabelProbs> classify(const std::string&, const std::vector<TextItem>& items) override {
    ++classify_calls;
    std::vector<LabelProbs> out;
    for (std::size_t i = 0; i < items.size() + extra_verdicts; ++i) out.push_back(labels);
    return out;
  }
  SequenceScore score(const std::string& model, const TextItem& item) override {
    ++score_calls;
    if (fail_transport) throw TransportError("down");
    SequenceScore s;
    s.model_id = model;
    s.tokens = text::tokenize(item.text);
    for (const auto& t : s.tokens) {
      s.cond_logprobs.push_back(-1.0 - 0.1 * static_cast<double>(t.size()));
      s.unigram_logprobs.push_back(unigram_override ? -9.0 - static_cast<double>(score_calls) : -3.0);
    }
    s.sequence_logprob = s.log_p() + sequence_offset;
    return s;
  }
  GenerateResult generate(const GenerateRequest& r) override { return {"echo " + r.prompt, 0.0}; }
  std::vector<ModelManifest> models() override {
    ModelManifest m;
    m.model_id = "gen";
    m.components = {{"a", 1000}, {"b", 500}};
    m.total_bytes = 1500;
    return {m};
  }
  std::string describe() const override { return "fake"; }

  LabelProbs labels{{"positive", 0.8}, {"negative", 0.2}};
  std::size_t extra_verdicts = 0;
  double sequence_offset = 0.0;
  bool unigram_override = false;
  bool fail_transport = false;
  int classify_calls = 0;
  int score_calls = 0;
};

}  // namespace

// ---------------------------------------------------------------- verdicts

TEST(Verdicts, CanonicalizesWireLabels) {
  const auto v = make_verdict(kTopic, {{"World", 0.1}, {"Sports", 0.2}, {"Business", 0.3}, {"Sci/Tech", 0.4}});
  EXPECT_EQ(v.label_probs.size(), 4u);
  EXPECT_EQ(predicted_label(v), "SciTech");
  EXPECT_EQ(predicted_label(make_verdict(kSent, {{"POSITIVE", 0.4}, {"NEGATIVE", 0.6}})), "negative");
}

TEST(Verdicts, RejectsMalformedDistributions) {
  EXPECT_THROW(make_verdict(kSent, {{"positive", 0.7}, {"negative", 0.7}}), ProtocolError);
  EXPECT_THROW(make_verdict(kSent, {{"positive", 1.0}}), ProtocolError);
  EXPECT_THROW(make_verdict(kSent, {{"positive", 1.5}, {"negative", -0.5}}), ProtocolError);
  EXPECT_THROW(make_verdict(kSent, {{"happy", 0.5}, {"negative", 0.5}}), ProtocolError);
  EXPECT_THROW(make_verdict(kSent, {{"positive", NAN}, {"negative", 0.5}}), ProtocolError);
}

TEST(Verdicts, PerTopicBinaryNeedNotSumToOne) {
  const auto v = make_verdict(kBinary, {{"World", 0.9}, {"Sports", 0.9}, {"Business", 0.2}, {"SciTech", 0.7}});
  // Tie on 0.9: lexicographically smallest canonical id.
  EXPECT_EQ(predicted_label(v), "Sports");
}

TEST(Verdicts, ArgmaxTieBreaksLexicographically) {
  EXPECT_EQ(predicted_label(make_verdict(kSent, {{"positive", 0.5}, {"negative", 0.5}})), "negative");
  EXPECT_EQ(predicted_label(make_verdict(kTopic, {{"World", 0.25}, {"Sports", 0.25}, {"Business", 0.25},
                                                  {"SciTech", 0.25}})),
            "Business");
}

// ---------------------------------------------------------------- sequence scores

TEST(SequenceScores, ValidateContract) {
  SequenceScore s;
  s.model_id = "m";
  EXPECT_THROW(s.validate(), EmptySequence);
  s.tokens = {"a", "b"};
  s.cond_logprobs = {-1, -2};
  s.unigram_logprobs = {-3};
  s.sequence_logprob = -3;
  EXPECT_THROW(s.validate(), ProtocolError);
  s.unigram_logprobs = {-3, 0.5};
  EXPECT_THROW(s.validate(), ProtocolError);
  s.unigram_logprobs = {-3, -4};
  EXPECT_NO_THROW(s.validate());
  s.sequence_logprob = -2.5;
  EXPECT_THROW(s.validate(), ProtocolError);
}

TEST(SequenceScores, JsonRoundTrip) {
  SequenceScore s{"m", {"x", "y"}, {-0.5, -0.25}, {-2.0, -3.0}, -0.75};
  const auto back = SequenceScore::from_json(nlohmann::json::parse(s.to_json().dump()));
  EXPECT_EQ(back.model_id, "m");
  EXPECT_EQ(back.tokens, s.tokens);
  EXPECT_EQ(back.cond_logprobs, s.cond_logprobs);
  EXPECT_DOUBLE_EQ(back.sequence_logprob, -0.75);
  EXPECT_THROW(SequenceScore::from_json(nlohmann::json::parse(R"({"tokens": 3})")), ProtocolError);
}

// ---------------------------------------------------------------- client

TEST(ScoringClient, ValidatesBatchSize) {
  FakeBackend fake;
  fake.extra_verdicts = 1;
  ScoringClient client(fake);
  EXPECT_THROW(client.classify(kSent, {{"k", "text"}}), ProtocolError);
}

TEST(ScoringClient, RejectsInconsistentSequenceLogprob) {
  FakeBackend fake;
  fake.sequence_offset = -0.5;
  ScoringClient client(fake);
  EXPECT_THROW(client.score_sequence("m", {"k", "some words"}), ProtocolError);
}

TEST(ScoringClient, RejectsContextDependentUnigrams) {
  FakeBackend fake;
  fake.unigram_override = true;
  ScoringClient client(fake);
  client.score_sequence("m", {"k1", "apple pie"});
  EXPECT_THROW(client.score_sequence("m", {"k2", "apple tart"}), ProtocolError);
}

TEST(ScoringClient, EmptyTextIsEmptySequence) {
  FakeBackend fake;
  ScoringClient client(fake);
  EXPECT_THROW(client.score_sequence("m", {"k", "   "}), EmptySequence);
  EXPECT_EQ(fake.score_calls, 0);
}

TEST(ScoringClient, TransportErrorsPropagate) {
  FakeBackend fake;
  fake.fail_transport = true;
  ScoringClient client(fake);
  EXPECT_THROW(client.score_sequence("m", {"k", "words"}), TransportError);
}

TEST(ScoringClient, MeasuresWallTimeWhenBackendDoesNot) {
  FakeBackend fake;
  ScoringClient client(fake);
  const auto r = client.generate({"k", "gen", "hello", 1, {}});
  EXPECT_EQ(r.text, "echo hello");
  EXPECT_GT(r.wall_ms, 0.0);
}

TEST(ScoringClient, FetchesAndValidatesManifests) {
  FakeBackend fake;
  ScoringClient client(fake);
  const auto m = client.fetch_manifest("gen");
  EXPECT_DOUBLE_EQ(m.total_gb(), 1.5e-6);
  EXPECT_THROW(client.fetch_manifest("nope"), ManifestError);
}

TEST(ScoringClient, CacheWarmReadEqualsColdRead) {
  TempDir tmp;
  FakeBackend fake;
  SequenceScore cold;
  ClassifierVerdict cold_v;
  {
    ScoreCache cache(tmp.path());
    ScoringClient client(fake, &cache);
    cold = client.score_sequence("m", {"k", " Some words here "});
    cold_v = client.classify(kSent, {{"k", "Some words here"}}).front();
    EXPECT_EQ(cache.size(), 2u);
  }
  fake.labels = {{"positive", 0.1}, {"negative", 0.9}};
  ScoreCache cache(tmp.path());
  ScoringClient client(fake, &cache);
  // Trimmed text hits the same key, so neither the backend change nor the
  // whitespace changes the answer.
  const auto warm = client.score_sequence("m", {"other-key", "Some words here"});
  const auto warm_v = client.classify(kSent, {{"other", "Some words here  "}}).front();
  EXPECT_EQ(fake.score_calls, 1);
  EXPECT_EQ(fake.classify_calls, 1);
  EXPECT_EQ(warm.tokens, cold.tokens);
  EXPECT_EQ(warm.cond_logprobs, cold.cond_logprobs);
  EXPECT_EQ(warm_v.label_probs, cold_v.label_probs);
}

TEST(ScoreCache, CorruptLinesAreIgnored) {
  TempDir tmp;
  {
    ScoreCache cache(tmp.path());
    cache.put("k1", nlohmann::json{{"v", 1}});
    cache.put("k1", nlohmann::json{{"v", 2}});
    cache.put("k2", nlohmann::json{{"v", 3}});
  }
  auto content = lpf::testkit::slurp(tmp / "scores.cache.jsonl");
  content += "{not json\n";
  content += R"({"key":"k3","value":{"v":4},"checksum":"0000000000000000"})" "\n";
  spit(tmp / "scores.cache.jsonl", content);
  ScoreCache cache(tmp.path());
  EXPECT_EQ(cache.size(), 2u);
  EXPECT_EQ(cache.corrupt_lines(), 2u);
  EXPECT_EQ((*cache.get("k1"))["v"], 1);
  EXPECT_FALSE(cache.get("k3"));
}

TEST(ScoreCache, ContentKeyNormalizesWhitespaceOnly) {
  EXPECT_EQ(ScoreCache::content_key("score", "m", " a b "), ScoreCache::content_key("score", "m", "a b"));
  EXPECT_NE(ScoreCache::content_key("score", "m", "a b"), ScoreCache::content_key("score", "m", "a  b"));
  EXPECT_NE(ScoreCache::content_key("score", "m", "a"), ScoreCache::content_key("classify", "m", "a"));
  EXPECT_NE(ScoreCache::content_key("score", "m", "a"), ScoreCache::content_key("score", "n", "a"));
}

// ---------------------------------------------------------------- replay

TEST(Replay, ServesRecordedResponsesAndReportsMissing) {
  TempDir tmp;
  spit(tmp / "r.jsonl",
       R"({"kind":"classify","model_id":"sent","key":"r1","labels":{"positive":0.3,"negative":0.7}})" "\n"
       R"({"kind":"score","model_id":"lm","key":"r1","tokens":["a"],"cond_logprobs":[-1.0],"unigram_logprobs":[-2.0],"sequence_logprob":-1.0})" "\n"
       R"({"kind":"generate","model_id":"gen","key":"r1","text":"out","wall_ms":12.5})" "\n");
  ReplayBackend replay(tmp.path());
  EXPECT_EQ(replay.size(), 3u);
  ScoringClient client(replay);
  EXPECT_EQ(predicted_label(client.classify(kSent, {{"r1", "whatever"}}).front()), "negative");
  EXPECT_EQ(client.score_sequence("lm", {"r1", "a"}).tokens.size(), 1u);
  EXPECT_DOUBLE_EQ(client.generate({"r1", "gen", "p", 0, {}}).wall_ms, 12.5);

  try {
    client.classify(kSent, {{"r1", "x"}, {"r2", "y"}, {"r3", "z"}});
    FAIL();
  } catch (const MissingRecord& e) {
    EXPECT_EQ(e.keys(), (std::vector<std::string>{"classify|sent|r2", "classify|sent|r3"}));
  }
  try {
    client.preflight({{"score", "lm", "r1"}, {"score", "lm", "r9"}, {"generate", "gen", "r1"}});
    FAIL();
  } catch (const MissingRecord& e) {
    EXPECT_EQ(e.keys(), (std::vector<std::string>{"score|lm|r9"}));
  }
  EXPECT_EQ(replay.network_calls(), 0u);
}

TEST(Replay, MalformedFilesFailLoudly) {
  TempDir tmp;
  spit(tmp / "r.jsonl", R"({"kind":"score","key":"no-model"})" "\n");
  EXPECT_THROW(ReplayBackend{tmp.path()}, LoadError);
  EXPECT_THROW(ReplayBackend{tmp / "absent"}, ConfigError);
}

// ---------------------------------------------------------------- records

TEST(Records, GenerationAndBundleRoundTrip) {
  GenerationRecord g;
  g.cell = {"llama2", "owt_neutral", 789, PromptMode::FewShot, ControlSpec::of(Sentiment::Negative, Topic::World),
            "000001-abcdef01", 1};
  g.formatted_input = "prompt";
  g.raw_text = "raw";
  g.post_text = "post";
  g.wall_ms = 3.5;
  g.warnings = {"w"};
  const auto g2 = GenerationRecord::from_json(nlohmann::json::parse(g.to_json().dump()));
  EXPECT_EQ(g2.key(), g.key());
  EXPECT_EQ(g2.post_text, "post");
  EXPECT_EQ(g2.warnings, g.warnings);

  ScoreBundle b;
  b.record_key = g.key();
  b.verdicts["bin"] = make_verdict(kBinary, {{"World", 0.9}, {"Sports", 0.1}, {"Business", 0.2}, {"SciTech", 0.3}});
  b.sequence_scores["lm"] = {"lm", {"post"}, {-1.0}, {-2.0}, -1.0};
  const auto b2 = ScoreBundle::from_json(nlohmann::json::parse(b.to_json().dump()));
  EXPECT_EQ(b2.verdicts.at("bin"), b.verdicts.at("bin"));
  EXPECT_EQ(b2.sequence_scores.at("lm").tokens, b.sequence_scores.at("lm").tokens);
}

TEST(Records, ReadersReportLineNumbers) {
  TempDir tmp;
  spit(tmp / "g.jsonl", "\n{\"cell\": 1}\n");
  try {
    read_generations(tmp / "g.jsonl");
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  spit(tmp / "s.jsonl", "{oops\n");
  EXPECT_THROW(read_score_bundles(tmp / "s.jsonl"), LoadError);
}

TEST(Records, AppenderNeverInterleavesLines) {
  TempDir tmp;
  {
    JsonlAppender out(tmp / "x.jsonl");
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&out, t] {
        for (int i = 0; i < 200; ++i) out.append(nlohmann::json{{"t", t}, {"i", i}, {"pad", std::string(64, 'x')}});
      });
    }
  }
  std::size_t lines = 0;
  for_each_jsonl(tmp / "x.jsonl", [&](const nlohmann::json& j, std::size_t) {
    EXPECT_TRUE(j.contains("t") && j.contains("i"));
    ++lines;
  });
  EXPECT_EQ(lines, 800u);
}

// ---------------------------------------------------------------- lemmas

TEST(Lemmas, ShippedTablesCoverCommonInflections) {
  const auto dir = lpf::testkit::data_dir() / "lemmas";
  const auto t = TableLemmas::from_files(dir / "base.tsv", dir / "extended.tsv");
  EXPECT_GT(t.base_size(), 10000u);
  EXPECT_EQ(t.base_lemma("servers"), "server");
  EXPECT_EQ(t.base_lemma("Scientists"), "scientist");
  EXPECT_EQ(t.base_lemma("prayed"), "pray");
  EXPECT_EQ(t.base_lemma("unknownword"), "unknownword");
  EXPECT_TRUE(t.extended_lemmas("ran").contains("run"));
  for (const auto& tok : {"planets", "minerals", "priests"}) {
    const auto ext = t.extended_lemmas(tok);
    EXPECT_TRUE(ext.contains(t.base_lemma(tok))) << tok;
  }
}

TEST(Lemmas, TableFormatErrors) {
  TempDir tmp;
  spit(tmp / "b.tsv", "# comment\nruns\trun\nbroken line\n");
  EXPECT_THROW(TableLemmas::from_files(tmp / "b.tsv"), LoadError);
  EXPECT_THROW(TableLemmas::from_files(tmp / "missing.tsv"), LoadError);
  spit(tmp / "ok.tsv", "Runs\tRun\n");
  EXPECT_EQ(TableLemmas::from_files(tmp / "ok.tsv").base_lemma("RUNS"), "run");
}

// ---------------------------------------------------------------- fluency identities

TEST(Fluency, SingleModelDefinitions) {
  SequenceScore s{"m", {"a", "b", "c", "d"}, {-1, -2, -3, -2}, {-4, -4, -5, -3}, -8};
  const auto f = fluency(s);
  EXPECT_DOUBLE_EQ(f.nce, -2.0);
  EXPECT_DOUBLE_EQ(f.ppl, std::exp(2.0));
  EXPECT_DOUBLE_EQ(f.slor, (-8.0 + 16.0) / 4.0);
}

TEST(Fluency, CrossModelPerplexityFollowsMeanNce) {
  SequenceScore a{"a", {"x", "y"}, {-1, -1}, {-3, -3}, -2};
  SequenceScore b{"b", {"x", "y", "z"}, {-2, -2, -2}, {-3, -3, -3}, -6};
  const auto f = fluency(std::vector<SequenceScore>{a, b});
  EXPECT_DOUBLE_EQ(f.nce, -1.5);
  EXPECT_DOUBLE_EQ(f.ppl, std::exp(1.5));
  EXPECT_DOUBLE_EQ(f.slor, (2.0 + 1.0) / 2.0);
  EXPECT_EQ(f.per_model.size(), 2u);
  EXPECT_THROW(fluency(std::vector<SequenceScore>{}), PreconditionError);
}

TEST(FluencyProperty, IdentitiesHoldOnRandomScores) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> len(1, 60);
  std::uniform_real_distribution<double> lp(-12.0, -0.001);
  for (int trial = 0; trial < 1500; ++trial) {
    SequenceScore s;
    s.model_id = "m";
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      s.tokens.push_back("t" + std::to_string(i));
      s.cond_logprobs.push_back(lp(rng));
      s.unigram_logprobs.push_back(trial % 10 == 0 ? s.cond_logprobs.back() : lp(rng));
    }
    s.sequence_logprob = s.log_p();
    ASSERT_NO_THROW(s.validate());
    const auto f = fluency(s);
    double cond = 0, uni = 0;
    for (int i = 0; i < n; ++i) {
      cond += s.cond_logprobs[static_cast<std::size_t>(i)];
      uni += s.unigram_logprobs[static_cast<std::size_t>(i)];
    }
    EXPECT_NEAR(f.ppl, std::exp(-f.nce), 1e-9 * f.ppl);
    EXPECT_NEAR(f.slor, f.nce - uni / n, 1e-9 * std::max(1.0, std::abs(f.slor)));
    EXPECT_NEAR(f.nce, cond / n, 1e-9 * std::abs(f.nce));
    if (trial % 10 == 0) {
      EXPECT_NEAR(f.slor, 0.0, 1e-12);
    }
  }
}
