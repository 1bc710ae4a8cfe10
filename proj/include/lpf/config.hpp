#pragma once

// Run configuration: one TOML (or JSON) file, paths resolved relative to
// it, every command-line flag applied as an override before validation.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpf/aggregate.hpp"
#include "lpf/corpus.hpp"
#include "lpf/digest.hpp"
#include "lpf/error.hpp"
#include "lpf/scoring.hpp"
#include "lpf/toml_json.hpp"

namespace lpf {

struct RunConfig {
  std::string run_id = "run";
  std::filesystem::path base_dir;
  std::filesystem::path profiles_dir;
  std::filesystem::path datasets_manifest;
  std::vector<std::string> techniques;
  std::vector<Attribute> attributes;
  std::vector<std::string> datasets;
  std::vector<std::int64_t> seeds = kDefaultSeeds;
  std::vector<PromptMode> prompt_modes = {PromptMode::ZeroShot, PromptMode::FewShot};
  std::map<Attribute, std::vector<ControlSpec>> values;
  std::vector<ClassifierSpec> sentiment_classifiers;
  std::vector<ClassifierSpec> topic_classifiers;
  std::vector<std::string> fluency_models;
  std::filesystem::path lemma_base;
  std::filesystem::path lemma_extended;
  std::optional<std::filesystem::path> replay_dir;
  std::optional<std::string> endpoint;
  std::filesystem::path output_root = "out";
  std::optional<std::filesystem::path> manifests_file;
  std::optional<std::filesystem::path> originals_file;
  std::map<std::string, double> weights = default_dataset_weights();
  StdevAxis stdev_axis = StdevAxis::Seeds;
  std::size_t workers = 4;
  std::size_t max_in_flight = 8;
  std::size_t batch_size = 16;
  bool svg = true;
  nlohmann::json generation_params = nlohmann::json::object();
  /// The resolved document the digest is computed over.
  nlohmann::json resolved;

  std::filesystem::path run_dir() const { return output_root / run_id; }
  std::filesystem::path generations_path() const { return run_dir() / "generations.jsonl"; }
  std::filesystem::path scores_path() const { return run_dir() / "scores.jsonl"; }
  std::filesystem::path metrics_path() const { return run_dir() / "metrics.jsonl"; }
  std::filesystem::path reports_dir() const { return output_root / "reports" / run_id; }

  std::vector<std::string> classifier_ids(Attribute task) const {
    std::vector<std::string> out;
    for (const auto& c : task == Attribute::Sentiment ? sentiment_classifiers : topic_classifiers) out.push_back(c.id);
    return out;
  }

  /// sha256 of the canonical (key-sorted) resolved configuration.
  std::string digest() const { return sha256_hex(resolved.dump()); }
};

/// Command-line overrides; unset members leave the file value alone.
struct ConfigOverrides {
  std::optional<std::string> replay_dir;
  std::optional<std::string> endpoint;
  std::optional<std::vector<std::int64_t>> seeds;
  std::optional<std::string> out;
  std::optional<std::string> stdev_axis;
};

namespace detail {

inline std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  if (!j[key].is_array()) throw ConfigError(std::string(key) + " must be a list");
  std::vector<std::string> out;
  for (const auto& v : j[key]) {
    if (!v.is_string()) throw ConfigError(std::string(key) + " must contain strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline std::vector<ClassifierSpec> classifier_list(const nlohmann::json& section, const char* key, Attribute task) {
  std::vector<ClassifierSpec> out;
  if (!section.contains(key)) return out;
  const auto binary = section.value("per_topic_binary", std::vector<std::string>{});
  for (const auto& v : section[key]) {
    ClassifierSpec c;
    c.task = task;
    if (v.is_string()) {
      c.id = v.get<std::string>();
      if (std::find(binary.begin(), binary.end(), c.id) != binary.end()) c.style = VerdictStyle::PerTopicBinary;
    } else {
      c.id = v.at("id").get<std::string>();
      if (v.value("style", std::string("distribution")) == "per_topic_binary") c.style = VerdictStyle::PerTopicBinary;
    }
    if (c.style == VerdictStyle::PerTopicBinary && task != Attribute::Topic) {
      throw ConfigError(c.id + ": per-topic binary style only applies to topic classifiers");
    }
    out.push_back(std::move(c));
  }
  return out;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

inline std::vector<std::int64_t> parse_seed_list(std::string_view s) {
  std::vector<std::int64_t> out;
  for (const auto& part : text::split(s, ',')) {
    const auto t = text::trim(part);
    if (t.empty()) continue;
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size()) throw ConfigError("invalid seed '" + t + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

/// Parses and validates. Collects every problem before raising, so one
/// run reports all configuration errors at once.
inline RunConfig config_from_json(nlohmann::json j, const std::filesystem::path& base_dir,
                                  const ConfigOverrides& ov = {}) {
  if (!j.is_object()) throw ConfigError("configuration must be a table");
  if (ov.replay_dir) j["backend"]["replay_dir"] = *ov.replay_dir;
  if (ov.endpoint) j["backend"]["endpoint"] = *ov.endpoint;
  if (ov.seeds) j["seeds"] = *ov.seeds;
  if (ov.out) j["output"] = *ov.out;
  if (ov.stdev_axis) j["stdev_axis"] = *ov.stdev_axis;

  std::vector<std::string> problems;
  const auto attempt = [&](auto&& fn) {
    try {
      fn();
    } catch (const nlohmann::json::exception& e) {
      problems.push_back(e.what());
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  };

  RunConfig c;
  c.base_dir = base_dir;
  attempt([&] { c.run_id = j.value("run_id", std::string("run")); });
  attempt([&] { c.profiles_dir = detail::resolve(base_dir, j.value("profiles_dir", std::string("profiles"))); });
  attempt([&] {
    c.datasets_manifest = detail::resolve(base_dir, j.value("datasets_manifest", std::string("datasets/manifest.json")));
  });
  attempt([&] { c.techniques = detail::string_list(j, "techniques"); });
  attempt([&] {
    for (const auto& a : detail::string_list(j, "attributes")) c.attributes.push_back(parse_attribute(a));
  });
  attempt([&] { c.datasets = detail::string_list(j, "datasets"); });
  attempt([&] {
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::int64_t>>();
  });
  attempt([&] {
    if (j.contains("prompt_modes")) {
      c.prompt_modes.clear();
      for (const auto& m : detail::string_list(j, "prompt_modes")) c.prompt_modes.push_back(parse_prompt_mode(m));
    }
  });
  attempt([&] {
    if (!j.contains("values")) return;
    for (const auto& [attr, list] : j["values"].items()) {
      const auto a = parse_attribute(attr);
      for (const auto& v : list) c.values[a].push_back(ControlSpec::parse(a, v.get<std::string>()));
    }
  });
  attempt([&] {
    const auto cls = j.value("classifiers", nlohmann::json::object());
    c.sentiment_classifiers = detail::classifier_list(cls, "sentiment", Attribute::Sentiment);
    c.topic_classifiers = detail::classifier_list(cls, "topic", Attribute::Topic);
  });
  attempt([&] { c.fluency_models = detail::string_list(j.value("fluency", nlohmann::json::object()), "models"); });
  attempt([&] {
    const auto lem = j.value("lemmas", nlohmann::json::object());
    if (lem.contains("base")) c.lemma_base = detail::resolve(base_dir, lem["base"].get<std::string>());
    if (lem.contains("extended")) c.lemma_extended = detail::resolve(base_dir, lem["extended"].get<std::string>());
  });
  attempt([&] {
    const auto be = j.value("backend", nlohmann::json::object());
    if (be.contains("replay_dir")) c.replay_dir = detail::resolve(base_dir, be["replay_dir"].get<std::string>());
    if (be.contains("endpoint")) c.endpoint = be["endpoint"].get<std::string>();
    c.max_in_flight = be.value("max_in_flight", c.max_in_flight);
    c.batch_size = be.value("batch_size", c.batch_size);
  });
  attempt([&] { c.output_root = detail::resolve(base_dir, j.value("output", std::string("out"))); });
  attempt([&] {
    if (j.contains("manifests")) c.manifests_file = detail::resolve(base_dir, j["manifests"].get<std::string>());
    if (j.contains("originals")) c.originals_file = detail::resolve(base_dir, j["originals"].get<std::string>());
  });
  attempt([&] {
    if (j.contains("weights")) c.weights = j["weights"].get<std::map<std::string, double>>();
  });
  attempt([&] { c.stdev_axis = parse_stdev_axis(j.value("stdev_axis", std::string("seeds"))); });
  attempt([&] { c.workers = j.value("workers", c.workers); });
  attempt([&] { c.svg = j.value("svg", true); });
  attempt([&] { c.generation_params = j.value("generation", nlohmann::json::object()); });

  if (c.seeds.empty()) problems.push_back("seeds must not be empty");
  if (std::set<std::int64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    problems.push_back("seeds must be distinct");
  }
  if (c.techniques.empty()) problems.push_back("techniques must not be empty");
  if (c.attributes.empty()) problems.push_back("attributes must not be empty");
  if (c.datasets.empty()) problems.push_back("datasets must not be empty");
  if (c.workers == 0) problems.push_back("workers must be >= 1");
  if (c.batch_size == 0) problems.push_back("backend.batch_size must be >= 1");
  const std::set<Attribute> attrs(c.attributes.begin(), c.attributes.end());
  const bool need_s = attrs.contains(Attribute::Sentiment) || attrs.contains(Attribute::Multiple);
  const bool need_t = attrs.contains(Attribute::Topic) || attrs.contains(Attribute::Multiple);
  if (need_s && c.sentiment_classifiers.size() != 3) {
    problems.push_back("classifiers.sentiment must list exactly 3 classifiers, got " +
                       std::to_string(c.sentiment_classifiers.size()));
  }
  if (need_t && c.topic_classifiers.size() != 3) {
    problems.push_back("classifiers.topic must list exactly 3 classifiers, got " +
                       std::to_string(c.topic_classifiers.size()));
  }
  if (attrs.contains(Attribute::Keywords) && c.lemma_base.empty()) {
    problems.push_back("keyword control needs lemmas.base");
  }
  for (const auto& d : c.datasets) {
    if (!c.weights.contains(d)) problems.push_back("no weight for dataset '" + d + "'");
  }
  if (!std::filesystem::is_directory(c.profiles_dir)) {
    problems.push_back("profiles_dir not found: " + c.profiles_dir.string());
  }
  if (!std::filesystem::exists(c.datasets_manifest)) {
    problems.push_back("datasets_manifest not found: " + c.datasets_manifest.string());
  }
  for (const auto* p : {&c.lemma_base, &c.lemma_extended}) {
    if (!p->empty() && !std::filesystem::exists(*p)) problems.push_back("lemma table not found: " + p->string());
  }
  if (c.replay_dir && !std::filesystem::is_directory(*c.replay_dir)) {
    problems.push_back("replay_dir not found: " + c.replay_dir->string());
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }

  // The digest covers the effective values, with paths relative to the
  // config so moving a checkout does not change it.
  nlohmann::json r = j;
  r["seeds"] = c.seeds;
  r["stdev_axis"] = to_string(c.stdev_axis);
  r.erase("output");
  if (r.contains("backend")) {
    r["backend"].erase("endpoint");
    r["backend"].erase("max_in_flight");
  }
  r.erase("workers");
  c.resolved = std::move(r);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& ov = {}) {
  auto j = load_structured_file(path);
  return config_from_json(std::move(j), std::filesystem::absolute(path).parent_path(), ov);
}

}  // namespace lpf
