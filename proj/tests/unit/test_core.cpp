#include <gtest/gtest.h>

#include "lpf/adapters.hpp"
#include "lpf/config.hpp"
#include "lpf/corpus.hpp"
#include "lpf/digest.hpp"
#include "lpf/stats.hpp"
#include "lpf/text.hpp"
#include "../support/test_util.hpp"

using namespace lpf;
using lpf::testkit::TempDir;
using lpf::testkit::spit;

// ---------------------------------------------------------------- text

TEST(Text, TokenizeLowercasesAndStripsEdgePunctuation) {
  EXPECT_EQ(text::tokenize("Hello, World!  It's   \"fine\"."),
            (std::vector<std::string>{"hello", "world", "it's", "fine"}));
  EXPECT_TRUE(text::tokenize("  ... !!  ").empty());
  EXPECT_EQ(text::tokenize("e-mail state-of-the-art"), (std::vector<std::string>{"e-mail", "state-of-the-art"}));
}

TEST(Text, TokenizeHandlesUnicodeSpaceAndPunctuation) {
  // No-break space separates, curly quotes and the dash are punctuation.
  EXPECT_EQ(text::tokenize("\u201c\u00c9cole\u201d\u00a0caf\u00e9\u2014"), (std::vector<std::string>{"\u00e9cole", "caf\u00e9"}));
}

TEST(Text, TrimAndSplit) {
  EXPECT_EQ(text::trim(" \t a b \n"), "a b");
  EXPECT_EQ(text::split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(text::replace_all("aXbXc", "X", "--"), "a--b--c");
}

TEST(Text, Utf8Validation) {
  EXPECT_TRUE(text::valid_utf8("plain ascii"));
  EXPECT_TRUE(text::valid_utf8("\xc3\xa9"));
  EXPECT_FALSE(text::valid_utf8("\xc3"));
  EXPECT_FALSE(text::valid_utf8("\xff\xfe"));
}

TEST(Digest, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(short_digest("abc"), "ba7816bf");
}

// ---------------------------------------------------------------- stats

TEST(Stats, MeanStdevWeighted) {
  const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(stats::mean(xs), 5.0);
  EXPECT_NEAR(stats::sample_stdev(xs), std::sqrt(32.0 / 7.0), 1e-12);
  EXPECT_EQ(stats::sample_stdev(std::vector<double>{3.0}), 0.0);
  EXPECT_DOUBLE_EQ(stats::weighted_mean(std::vector<double>{1, 3}, std::vector<double>{3, 1}), 1.5);
  EXPECT_THROW(stats::mean(std::vector<double>{}), PreconditionError);
  EXPECT_THROW(stats::weighted_mean(std::vector<double>{1}, std::vector<double>{0}), PreconditionError);
}

TEST(Stats, PearsonAndSpearman) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{2, 4, 6, 8, 10};
  const std::vector<double> c{5, 6, 7, 8, 7};
  EXPECT_NEAR(stats::pearson(a, b), 1.0, 1e-12);
  // Hand-computed: sxy = 6, sxx = 10, syy = 5.2.
  EXPECT_NEAR(stats::pearson(a, c), 6.0 / std::sqrt(10.0 * 5.2), 1e-12);
  EXPECT_EQ(stats::average_ranks(c), (std::vector<double>{1, 2, 3.5, 5, 3.5}));
  EXPECT_THROW(stats::pearson(a, std::vector<double>{1, 1, 1, 1, 1}), PreconditionError);
}

TEST(Stats, FormatFixedRoundsHalfAwayFromZero) {
  EXPECT_EQ(stats::format_fixed(73.15, 1), "73.2");
  EXPECT_EQ(stats::format_fixed(2.675, 2), "2.68");
  EXPECT_EQ(stats::format_fixed(-0.004, 2), "0.00");
  EXPECT_EQ(stats::format_fixed(-1.005, 2), "-1.01");
  EXPECT_EQ(stats::format_fixed(99.995, 2), "100.00");
  EXPECT_EQ(stats::format_fixed(7.0, 0), "7");
}

// ---------------------------------------------------------------- corpus

TEST(Corpus, ControlValuesInTableOrder) {
  EXPECT_EQ(control_values(Attribute::Sentiment).size(), 2u);
  EXPECT_EQ(control_values(Attribute::Topic).size(), 4u);
  EXPECT_EQ(control_values(Attribute::Keywords).size(), 7u);
  const auto multi = control_values(Attribute::Multiple);
  ASSERT_EQ(multi.size(), 8u);
  EXPECT_EQ(multi.front().value_id(), "positive+World");
  EXPECT_EQ(multi.back().value_id(), "negative+SciTech");
  EXPECT_EQ(control_values(Attribute::Keywords)[1].value_id(), "plea,subpoena,transcript,bankrupt");
}

TEST(Corpus, ControlSpecParseRoundTrips) {
  for (auto a : kAllAttributes) {
    for (const auto& c : control_values(a)) {
      EXPECT_EQ(ControlSpec::parse(a, c.value_id()), c);
      EXPECT_NO_THROW(c.validate(true));
    }
  }
  EXPECT_THROW(ControlSpec::parse(Attribute::Multiple, "positive"), ConfigError);
  EXPECT_THROW(ControlSpec::of({"a", "b"}).validate(true), PreconditionError);
  ControlSpec broken = ControlSpec::of(Sentiment::Positive);
  broken.topic = Topic::World;
  EXPECT_THROW(broken.validate(), PreconditionError);
}

TEST(Corpus, TopicLabelAliases) {
  EXPECT_EQ(parse_topic("Science/Technology"), Topic::SciTech);
  EXPECT_EQ(parse_topic("sci/tech"), Topic::SciTech);
  EXPECT_EQ(parse_topic("world"), Topic::World);
  EXPECT_THROW(parse_topic("politics"), ConfigError);
  EXPECT_EQ(parse_sentiment("POSITIVE"), Sentiment::Positive);
}

TEST(Corpus, LoadLinesDatasetAssignsStableIds) {
  TempDir tmp;
  spit(tmp / "d.txt", "  First prompt \r\nSecond\n\n");
  const auto ds = load_dataset(tmp / "d.txt", "lines", "d", "D", 2);
  ASSERT_EQ(ds.samples.size(), 2u);
  EXPECT_EQ(ds.samples[0].text, "First prompt");
  EXPECT_EQ(ds.samples[0].id, "000000-" + short_digest("First prompt"));
  EXPECT_EQ(ds.samples[1].index, 1u);
  EXPECT_TRUE(ds.warnings.empty());
}

TEST(Corpus, LoadDatasetErrors) {
  TempDir tmp;
  spit(tmp / "empty.txt", "");
  EXPECT_THROW(load_dataset(tmp / "empty.txt", "lines"), LoadError);
  spit(tmp / "hole.txt", "a\n   \nb\n");
  EXPECT_THROW(load_dataset(tmp / "hole.txt", "lines"), LoadError);
  spit(tmp / "bad.txt", "ok\n\xff\xfe\n");
  EXPECT_THROW(load_dataset(tmp / "bad.txt", "lines"), LoadError);
  EXPECT_THROW(load_dataset(tmp / "missing.txt", "lines"), LoadError);
  spit(tmp / "x.txt", "a\n");
  EXPECT_THROW(load_dataset(tmp / "x.txt", "csv"), LoadError);
}

TEST(Corpus, SizeMismatchAndDuplicatesWarn) {
  TempDir tmp;
  spit(tmp / "d.txt", "same\nsame\n");
  const auto ds = load_dataset(tmp / "d.txt", "lines", "d", "", 5);
  ASSERT_EQ(ds.warnings.size(), 2u);
  EXPECT_NE(ds.warnings[0].find("duplicate"), std::string::npos);
  EXPECT_NE(ds.warnings[1].find("expected 5"), std::string::npos);
  EXPECT_NE(ds.samples[0].id, ds.samples[1].id);
}

TEST(Corpus, StsLoaderKeepsMainCaptions) {
  TempDir tmp;
  spit(tmp / "sts.csv",
       "main-captions\tMSRvid\t2012\t1\t2.5\tA dog runs.\tA dog is running.\n"
       "main-news\tx\t2012\t2\t1.0\tNews.\tMore news.\n");
  const auto ds = load_dataset(tmp / "sts.csv", "sts");
  ASSERT_EQ(ds.samples.size(), 1u);
  EXPECT_EQ(ds.samples[0].text, "A dog runs.");
  spit(tmp / "short.csv", "main-captions\tonly\n");
  EXPECT_THROW(load_dataset(tmp / "short.csv", "sts"), LoadError);
}

TEST(Corpus, HeaderSidecarOverridesName) {
  TempDir tmp;
  spit(tmp / "d.txt", "a\n");
  spit(tmp / "d.txt.header.json", R"({"name": "Pretty name"})");
  EXPECT_EQ(load_dataset(tmp / "d.txt", "lines").name, "Pretty name");
}

TEST(Corpus, ShippedManifestMatchesDeclaredSizes) {
  const auto entries = load_dataset_manifest(lpf::testkit::data_dir() / "datasets/manifest.json");
  std::map<std::string, std::size_t> sizes;
  for (const auto& e : entries) sizes[e.id] = e.expected_size;
  EXPECT_EQ(sizes.at("pplm_prompts"), 35u);
  EXPECT_EQ(sizes.at("owt_neutral"), 5000u);
  EXPECT_EQ(sizes.at("cloze_2018"), 1571u);
  EXPECT_EQ(sizes.at("sts_test"), 625u);
}

namespace {

Dataset tiny(const std::string& id, std::size_t n) {
  Dataset d;
  d.id = id;
  for (std::size_t i = 0; i < n; ++i) d.samples.push_back({make_sample_id(i, id + std::to_string(i)), "t", i});
  d.declared_size = n;
  return d;
}

}  // namespace

TEST(Grid, ExpandsCrossProductAndSkipsUnsupported) {
  const auto a = tiny("a", 2);
  const auto b = tiny("b", 3);
  GridConfig g;
  g.techniques = {{"plain", {Attribute::Sentiment, Attribute::Topic}, false},
                  {"llm", {Attribute::Sentiment, Attribute::Keywords}, true}};
  g.attributes = {Attribute::Sentiment, Attribute::Keywords};
  g.datasets = {&a, &b};
  g.seeds = {1, 2};
  const auto grid = expand_grid(g);
  // plain: sentiment only -> 2 values * 5 samples * 2 seeds = 20
  // llm: 2 modes * (2 sentiment + 7 keyword values) * 5 * 2 = 180
  EXPECT_EQ(grid.cells.size(), 200u);
  ASSERT_EQ(grid.skipped.size(), 1u);
  EXPECT_NE(grid.skipped[0].find("plain x keywords"), std::string::npos);
  std::set<std::string> keys;
  for (const auto& c : grid.cells) keys.insert(c.key());
  EXPECT_EQ(keys.size(), grid.cells.size());
}

TEST(Grid, CanonicalOrderIsIndependentOfInputOrder) {
  const auto a = tiny("a", 2);
  const auto b = tiny("b", 2);
  GridConfig g1;
  g1.techniques = {{"x", {Attribute::Topic}, false}, {"y", {Attribute::Topic}, true}};
  g1.attributes = {Attribute::Topic};
  g1.datasets = {&a, &b};
  g1.seeds = {3, 1};
  GridConfig g2 = g1;
  std::reverse(g2.techniques.begin(), g2.techniques.end());
  std::reverse(g2.datasets.begin(), g2.datasets.end());
  g2.seeds = {1, 3};
  const auto c1 = expand_grid(g1).cells;
  const auto c2 = expand_grid(g2).cells;
  ASSERT_EQ(c1.size(), c2.size());
  for (std::size_t i = 0; i < c1.size(); ++i) EXPECT_EQ(c1[i].key(), c2[i].key());
  EXPECT_EQ(c1.front().control.topic, Topic::World);
}

TEST(Grid, PromptingWithoutModesIsSkipped) {
  const auto a = tiny("a", 1);
  GridConfig g;
  g.techniques = {{"llm", {Attribute::Sentiment}, true}};
  g.attributes = {Attribute::Sentiment};
  g.datasets = {&a};
  g.prompt_modes = {};
  const auto grid = expand_grid(g);
  EXPECT_TRUE(grid.cells.empty());
  EXPECT_EQ(grid.skipped.size(), 1u);
}

TEST(Grid, CellJsonRoundTrips) {
  const auto a = tiny("a", 3);
  GridConfig g;
  g.techniques = {{"llm", {Attribute::Multiple, Attribute::Keywords}, true}};
  g.attributes = {Attribute::Multiple, Attribute::Keywords};
  g.datasets = {&a};
  for (const auto& c : expand_grid(g).cells) {
    const auto back = ExperimentCell::from_json(nlohmann::json::parse(c.to_json().dump()));
    EXPECT_EQ(back.key(), c.key());
    EXPECT_EQ(back.sample_index, c.sample_index);
  }
}

// ---------------------------------------------------------------- adapters

namespace {

const std::map<std::string, TechniqueProfile>& shipped_profiles() {
  static const auto p = load_profiles(lpf::testkit::data_dir() / "profiles");
  return p;
}

Sample sample(const std::string& t) { return {make_sample_id(0, t), t, 0}; }

}  // namespace

TEST(Adapters, AllTwelveProfilesLoad) {
  const auto& p = shipped_profiles();
  EXPECT_EQ(p.size(), 12u);
  for (const char* id : {"bolt", "cat_paw", "cbart", "ctrl", "dexperts", "discup", "falcon", "gedi", "llama2",
                         "multi_ctg", "pplm", "prior_ctg"}) {
    EXPECT_TRUE(p.contains(id)) << id;
  }
  EXPECT_TRUE(p.at("llama2").prompting());
  EXPECT_TRUE(p.at("falcon").prompting());
  EXPECT_FALSE(p.at("ctrl").prompting());
}

TEST(Adapters, TopicMappingFollowsProfiles) {
  const auto& p = shipped_profiles();
  EXPECT_FALSE(map_topic(p.at("ctrl"), Topic::World).supported());
  EXPECT_EQ(map_topic(p.at("ctrl"), Topic::SciTech).labels.size(), 3u);
  EXPECT_EQ(native_topic_label(p.at("ctrl"), Topic::Business), "Finance");
  EXPECT_THROW(native_topic_label(p.at("pplm"), Topic::Sports), UnmappableTopic);
  EXPECT_EQ(native_topic_label(p.at("llama2"), Topic::SciTech), "Science/Technology");
}

TEST(Adapters, ControlCodeInputForCtrl) {
  const auto& ctrl = shipped_profiles().at("ctrl");
  const auto in = format_input(ctrl, sample("The lake"), ControlSpec::of(Topic::Sports), PromptMode::None);
  EXPECT_EQ(in.text, "Fitness The lake");
  EXPECT_EQ(in.control_value, "Fitness");
  EXPECT_THROW(format_input(ctrl, sample("x"), ControlSpec::of(Sentiment::Positive), PromptMode::None),
               UnsupportedControl);
  EXPECT_THROW(format_input(ctrl, sample("x"), ControlSpec::of(Topic::World), PromptMode::None), UnmappableTopic);
  EXPECT_THROW(format_input(ctrl, sample("x"), ControlSpec::of(Topic::Sports), PromptMode::ZeroShot),
               UnsupportedControl);
}

TEST(Adapters, ZeroShotPromptRendersEveryPlaceholder) {
  const auto& llama = shipped_profiles().at("llama2");
  const auto in = format_input(llama, sample("The chicken"), ControlSpec::of(Topic::SciTech), PromptMode::ZeroShot);
  EXPECT_NE(in.text.find("starting with \"The chicken\" with a science/technology topic [/INST]"), std::string::npos)
      << in.text;
  EXPECT_EQ(in.text.find('{'), std::string::npos);
  EXPECT_THROW(format_input(llama, sample("x"), ControlSpec::of(Topic::SciTech), PromptMode::None),
               UnsupportedControl);
}

TEST(Adapters, FewShotStoryMultiplePromptUsesExamples) {
  const auto& llama = shipped_profiles().at("llama2");
  const auto in = format_input(llama, sample("Tom had a dog."), ControlSpec::of(Sentiment::Negative, Topic::Business),
                               PromptMode::FewShot, true);
  EXPECT_NE(in.text.find("with negative sentiment and business topic"), std::string::npos) << in.text;
  EXPECT_NE(in.text.find("negative sentiment and sports"), std::string::npos);
  EXPECT_EQ(in.text.find("{example"), std::string::npos);
}

TEST(Adapters, KeywordPromptQuotesKeywords) {
  const auto& llama = shipped_profiles().at("llama2");
  const auto in = format_input(llama, sample("A man"), ControlSpec::of(keyword_sets()[0]), PromptMode::ZeroShot);
  EXPECT_NE(in.text.find("\"router\", \"Linux\", \"keyboard\", \"server\""), std::string::npos) << in.text;
}

TEST(Adapters, PlaceholderBinding) {
  EXPECT_EQ(detail::bind_placeholders("{a} and {b c}", {{"a", "1"}, {"b c", "2"}}), "1 and 2");
  EXPECT_EQ(detail::bind_placeholders("json {\"k\": 1}", {}), "json {\"k\": 1}");
  EXPECT_THROW(detail::bind_placeholders("{missing}", {}), RenderError);
}

TEST(Adapters, PostprocessStripControl) {
  TechniqueProfile p;
  p.technique_id = "t";
  p.postprocess_rule = PostprocessRule::StripControl;
  const FormattedInput in{"Fitness The lake", "Fitness"};
  auto r = postprocess(p, "Fitness: Fitness The lake was calm.", in);
  EXPECT_EQ(r.text, "The lake was calm.");
  EXPECT_TRUE(r.warnings.empty());
  r = postprocess(p, "The lake was calm.", in);
  EXPECT_EQ(r.text, "The lake was calm.");
  ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(Adapters, PostprocessEndOfTextRules) {
  TechniqueProfile p;
  p.technique_id = "t";
  const FormattedInput in{"positive:The lake", "positive"};
  p.postprocess_rule = PostprocessRule::StripEotAndControl;
  EXPECT_EQ(postprocess(p, "<|endoftext|><|endoftext|>positive The lake", in).text, "The lake");
  p.postprocess_rule = PostprocessRule::StripEot;
  EXPECT_EQ(postprocess(p, "<|endoftext|>The lake", in).text, "The lake");
  p.postprocess_rule = PostprocessRule::TruncateAtEot;
  EXPECT_EQ(postprocess(p, "The lake<|endoftext|>junk", in).text, "The lake");
  EXPECT_EQ(postprocess(p, "The lake", in).warnings.size(), 1u);
}

TEST(Adapters, PostprocessStripPromptWithOrWithoutMarker) {
  TechniqueProfile p;
  p.technique_id = "t";
  p.postprocess_rule = PostprocessRule::StripPrompt;
  const FormattedInput in{"<s> [INST] Write text [/INST]", ""};
  EXPECT_EQ(postprocess(p, "<s> [INST] Write text [/INST] The answer.", in).text, "The answer.");
  EXPECT_EQ(postprocess(p, "  [INST] Write text [/INST]  The answer.", in).text, "The answer.");
  const auto r = postprocess(p, "Unrelated.", in);
  EXPECT_EQ(r.text, "Unrelated.");
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Adapters, PostprocessFalconTurns) {
  TechniqueProfile p;
  p.technique_id = "falcon";
  p.postprocess_rule = PostprocessRule::StripPromptFalcon;
  const FormattedInput opens{"User: Write.\nFalcon:", ""};
  EXPECT_EQ(postprocess(p, "User: Write.\nFalcon: Reply here. User: more", opens).text, "Reply here.");
  const FormattedInput plain{"User: Write.", ""};
  EXPECT_EQ(postprocess(p, "User: Write. Falcon: Reply. User: again", plain).text, "Reply.");
  const auto r = postprocess(p, "User: Write. Falcon: Reply.", plain);
  EXPECT_EQ(r.text, "Reply.");
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Adapters, ProfileValidation) {
  auto j = nlohmann::json::parse(R"({"id":"x","family":"fine_tuning","supported_attributes":["topic"],
                                     "topic_map":{"World":["w"]}})");
  EXPECT_THROW(profile_from_json(j), ConfigError);
  j = nlohmann::json::parse(R"({"id":"x","family":"prompting","supported_attributes":["sentiment"]})");
  EXPECT_THROW(profile_from_json(j), ConfigError);
  j = nlohmann::json::parse(R"({"id":"x","family":"bogus","supported_attributes":[]})");
  EXPECT_THROW(profile_from_json(j), ConfigError);
}

// ---------------------------------------------------------------- config

namespace {

nlohmann::json minimal_config() {
  return nlohmann::json::parse(R"({
    "run_id": "t",
    "techniques": ["prior_ctg"],
    "attributes": ["sentiment"],
    "datasets": ["pplm_prompts"],
    "classifiers": {"sentiment": ["a", "b", "c"]}
  })");
}

RunConfig from(nlohmann::json j, const ConfigOverrides& ov = {}) {
  j["profiles_dir"] = (lpf::testkit::data_dir() / "profiles").string();
  j["datasets_manifest"] = (lpf::testkit::data_dir() / "datasets/manifest.json").string();
  return config_from_json(std::move(j), lpf::testkit::source_dir(), ov);
}

}  // namespace

TEST(Config, MinimalConfigResolves) {
  const auto c = from(minimal_config());
  EXPECT_EQ(c.run_id, "t");
  EXPECT_EQ(c.seeds, kDefaultSeeds);
  EXPECT_EQ(c.stdev_axis, StdevAxis::Seeds);
  EXPECT_EQ(c.classifier_ids(Attribute::Sentiment), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(c.output_root, lpf::testkit::source_dir() / "out");
  EXPECT_EQ(c.weights.at("owt_neutral"), 5000.0);
}

TEST(Config, OverridesWinAndChangeDigest) {
  const auto base = from(minimal_config());
  ConfigOverrides ov;
  ov.seeds = std::vector<std::int64_t>{7, 8};
  ov.stdev_axis = "cells";
  ov.endpoint = "http://127.0.0.1:9";
  const auto c = from(minimal_config(), ov);
  EXPECT_EQ(c.seeds, (std::vector<std::int64_t>{7, 8}));
  EXPECT_EQ(c.stdev_axis, StdevAxis::Cells);
  EXPECT_EQ(c.endpoint, "http://127.0.0.1:9");
  EXPECT_NE(base.digest(), c.digest());
  EXPECT_EQ(base.digest(), from(minimal_config()).digest());
}

TEST(Config, CollectsEveryProblem) {
  auto j = minimal_config();
  j["seeds"] = {1, 1};
  j["classifiers"]["sentiment"] = {"only_one"};
  j["attributes"] = {"sentiment", "keywords"};
  j["stdev_axis"] = "bogus";
  try {
    from(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("distinct"), std::string::npos) << msg;
    EXPECT_NE(msg.find("exactly 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("lemmas.base"), std::string::npos) << msg;
    EXPECT_NE(msg.find("stdev-axis"), std::string::npos) << msg;
  }
}

TEST(Config, SeedListParsing) {
  EXPECT_EQ(detail::parse_seed_list("1, 2,3"), (std::vector<std::int64_t>{1, 2, 3}));
  EXPECT_THROW(detail::parse_seed_list("1,x"), ConfigError);
  EXPECT_TRUE(detail::parse_seed_list(" , ").empty());
}

TEST(Config, TomlAndJsonAreEquivalent) {
  TempDir tmp;
  spit(tmp / "run.toml",
       "run_id = \"t\"\ntechniques = [\"prior_ctg\"]\nattributes = [\"sentiment\"]\n"
       "datasets = [\"pplm_prompts\"]\nseeds = [1, 2]\n[classifiers]\nsentiment = [\"a\", \"b\", \"c\"]\n");
  spit(tmp / "run.json",
       R"({"run_id":"t","techniques":["prior_ctg"],"attributes":["sentiment"],"datasets":["pplm_prompts"],)"
       R"("seeds":[1,2],"classifiers":{"sentiment":["a","b","c"]}})");
  std::filesystem::create_directories(tmp / "profiles");
  std::filesystem::create_directories(tmp / "datasets");
  spit(tmp / "datasets/manifest.json", "[]");
  const auto a = load_config(tmp / "run.toml");
  const auto b = load_config(tmp / "run.json");
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.seeds, b.seeds);
}
