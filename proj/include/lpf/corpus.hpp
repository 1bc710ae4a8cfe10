#pragma once

// Evaluation datasets, control attributes and the experiment grid.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpf/digest.hpp"
#include "lpf/error.hpp"
#include "lpf/text.hpp"

namespace lpf {

enum class Attribute { Sentiment, Topic, Keywords, Multiple };
enum class Sentiment { Positive, Negative };
enum class Topic { World, Sports, Business, SciTech };
enum class PromptMode { None, ZeroShot, FewShot };

inline constexpr std::array kAllAttributes = {Attribute::Sentiment, Attribute::Topic,
                                              Attribute::Keywords, Attribute::Multiple};
inline constexpr std::array kAllSentiments = {Sentiment::Positive, Sentiment::Negative};
inline constexpr std::array kAllTopics = {Topic::World, Topic::Sports, Topic::Business,
                                          Topic::SciTech};

/// Seeds used for every technique in the reference grid.
inline const std::vector<std::int64_t> kDefaultSeeds = {789, 3443, 9817};

inline std::string to_string(Attribute a) {
  switch (a) {
    case Attribute::Sentiment: return "sentiment";
    case Attribute::Topic: return "topic";
    case Attribute::Keywords: return "keywords";
    case Attribute::Multiple: return "multiple";
  }
  return "?";
}

inline std::string to_string(Sentiment s) { return s == Sentiment::Positive ? "positive" : "negative"; }

/// Canonical topic id. Lexicographic order of these ids is the documented
/// tie-break order for topic argmax.
inline std::string to_string(Topic t) {
  switch (t) {
    case Topic::World: return "World";
    case Topic::Sports: return "Sports";
    case Topic::Business: return "Business";
    case Topic::SciTech: return "SciTech";
  }
  return "?";
}

/// Display label as written in the control-value table.
inline std::string display_name(Topic t) {
  return t == Topic::SciTech ? "Science/Technology" : to_string(t);
}

inline std::string to_string(PromptMode m) {
  switch (m) {
    case PromptMode::None: return "none";
    case PromptMode::ZeroShot: return "zs";
    case PromptMode::FewShot: return "fs";
  }
  return "?";
}

inline Attribute parse_attribute(std::string_view s) {
  const std::string l = text::lowercase(s);
  for (auto a : kAllAttributes) {
    if (to_string(a) == l) return a;
  }
  throw ConfigError("unknown control attribute '" + std::string(s) + "'");
}

inline Sentiment parse_sentiment(std::string_view s) {
  const std::string l = text::lowercase(s);
  if (l == "positive") return Sentiment::Positive;
  if (l == "negative") return Sentiment::Negative;
  throw ConfigError("unknown sentiment '" + std::string(s) + "'");
}

inline Topic parse_topic(std::string_view s) {
  const std::string l = text::lowercase(s);
  if (l == "world") return Topic::World;
  if (l == "sports") return Topic::Sports;
  if (l == "business") return Topic::Business;
  if (l == "scitech" || l == "science/technology" || l == "sci/tech") return Topic::SciTech;
  throw ConfigError("unknown topic '" + std::string(s) + "'");
}

inline PromptMode parse_prompt_mode(std::string_view s) {
  const std::string l = text::lowercase(s);
  if (l == "none" || l.empty()) return PromptMode::None;
  if (l == "zs" || l == "zeroshot" || l == "zero-shot" || l == "zero_shot") return PromptMode::ZeroShot;
  if (l == "fs" || l == "fewshot" || l == "few-shot" || l == "few_shot") return PromptMode::FewShot;
  throw ConfigError("unknown prompt mode '" + std::string(s) + "'");
}

/// The seven keyword sets, verbatim.
inline const std::vector<std::vector<std::string>>& keyword_sets() {
  static const std::vector<std::vector<std::string>> sets = {
      {"router", "Linux", "keyboard", "server"},
      {"plea", "subpoena", "transcript", "bankrupt"},
      {"torpedo", "headquarters", "infantry", "battlefield"},
      {"court", "culture", "communism", "capitalism"},
      {"Bible", "church", "priest", "saint"},
      {"microscope", "mass", "mineral", "scientist"},
      {"meteor", "planet", "satellite", "astronaut"},
  };
  return sets;
}

struct ControlSpec {
  Attribute attribute = Attribute::Sentiment;
  std::optional<Sentiment> sentiment;
  std::optional<Topic> topic;
  std::vector<std::string> keywords;

  static ControlSpec of(Sentiment s) { return {Attribute::Sentiment, s, std::nullopt, {}}; }
  static ControlSpec of(Topic t) { return {Attribute::Topic, std::nullopt, t, {}}; }
  static ControlSpec of(std::vector<std::string> kws) {
    return {Attribute::Keywords, std::nullopt, std::nullopt, std::move(kws)};
  }
  static ControlSpec of(Sentiment s, Topic t) { return {Attribute::Multiple, s, t, {}}; }

  /// Throws PreconditionError unless exactly the fields demanded by the
  /// attribute are set. With `standard_sets` the keyword list must be one of
  /// the seven fixed sets.
  void validate(bool standard_sets = false) const {
    const bool need_s = attribute == Attribute::Sentiment || attribute == Attribute::Multiple;
    const bool need_t = attribute == Attribute::Topic || attribute == Attribute::Multiple;
    const bool need_k = attribute == Attribute::Keywords;
    if (sentiment.has_value() != need_s || topic.has_value() != need_t ||
        keywords.empty() == need_k) {
      throw PreconditionError("control spec fields do not match attribute " + to_string(attribute));
    }
    if (need_k && standard_sets) {
      const auto& sets = keyword_sets();
      if (std::find(sets.begin(), sets.end(), keywords) == sets.end()) {
        throw PreconditionError("keyword set is not one of the fixed sets: " + value_id());
      }
    }
  }

  /// Stable identifier of the control value, e.g. "positive",
  /// "SciTech", "positive+Business", "router,Linux,keyboard,server".
  std::string value_id() const {
    switch (attribute) {
      case Attribute::Sentiment: return sentiment ? to_string(*sentiment) : "?";
      case Attribute::Topic: return topic ? to_string(*topic) : "?";
      case Attribute::Multiple:
        return (sentiment ? to_string(*sentiment) : "?") + "+" + (topic ? to_string(*topic) : "?");
      case Attribute::Keywords: {
        std::string out;
        for (std::size_t i = 0; i < keywords.size(); ++i) out += (i ? "," : "") + keywords[i];
        return out;
      }
    }
    return "?";
  }

  static ControlSpec parse(Attribute attribute, std::string_view value) {
    switch (attribute) {
      case Attribute::Sentiment: return of(parse_sentiment(value));
      case Attribute::Topic: return of(parse_topic(value));
      case Attribute::Multiple: {
        const auto plus = value.find('+');
        if (plus == std::string_view::npos) throw ConfigError("multiple control needs 'sent+topic'");
        return of(parse_sentiment(value.substr(0, plus)), parse_topic(value.substr(plus + 1)));
      }
      case Attribute::Keywords: {
        auto kws = text::split(value, ',');
        for (auto& k : kws) k = text::trim(k);
        std::erase_if(kws, [](const std::string& k) { return k.empty(); });
        return of(std::move(kws));
      }
    }
    throw ConfigError("bad attribute");
  }

  friend bool operator==(const ControlSpec&, const ControlSpec&) = default;
};

/// Exact value list per attribute, in table order.
inline std::vector<ControlSpec> control_values(Attribute attribute) {
  std::vector<ControlSpec> out;
  switch (attribute) {
    case Attribute::Sentiment:
      for (auto s : kAllSentiments) out.push_back(ControlSpec::of(s));
      break;
    case Attribute::Topic:
      for (auto t : kAllTopics) out.push_back(ControlSpec::of(t));
      break;
    case Attribute::Keywords:
      for (const auto& set : keyword_sets()) out.push_back(ControlSpec::of(set));
      break;
    case Attribute::Multiple:
      for (auto s : kAllSentiments)
        for (auto t : kAllTopics) out.push_back(ControlSpec::of(s, t));
      break;
  }
  return out;
}

/// Position of `control` in its attribute's table order; values outside
/// the table sort after every table value.
inline std::size_t control_order(const ControlSpec& control) {
  const auto values = control_values(control.attribute);
  const auto it = std::find(values.begin(), values.end(), control);
  return it == values.end() ? values.size() : static_cast<std::size_t>(it - values.begin());
}

struct Sample {
  std::string id;
  std::string text;
  std::size_t index = 0;
};

struct Dataset {
  std::string id;
  std::string name;
  std::vector<Sample> samples;
  std::size_t declared_size = 0;
  std::vector<std::string> warnings;
  bool story = false;  // story openings (STS, Cloze) rather than free-text prompts
};

/// Zero-padded position plus 8 hex digits of the content digest, so a
/// reordered or edited file produces different ids.
inline std::string make_sample_id(std::size_t index, std::string_view text) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index << '-' << short_digest(text);
  return os.str();
}

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open dataset file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  // A single trailing newline does not introduce an empty record.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace detail

inline Dataset load_dataset(const std::filesystem::path& path, std::string_view format_id,
                            std::string id = {}, std::string name = {},
                            std::optional<std::size_t> expected_size = std::nullopt) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw LoadError("dataset file is empty: " + path.string());
  if (id.empty()) id = path.stem().string();
  if (name.empty()) name = id;

  const std::filesystem::path sidecar = path.string() + ".header.json";
  if (std::filesystem::exists(sidecar)) {
    std::ifstream in(sidecar);
    const auto header = nlohmann::json::parse(in, nullptr, false);
    if (header.is_discarded() || !header.is_object()) {
      throw LoadError("malformed header sidecar " + sidecar.string());
    }
    if (header.contains("name")) name = header["name"].get<std::string>();
  }

  Dataset ds{id, name, {}, 0, {}, false};
  const auto add = [&](std::size_t line_no, std::string_view raw) {
    if (!text::valid_utf8(raw)) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": invalid UTF-8");
    }
    std::string t = text::trim(raw);
    if (t.empty()) throw LoadError(path.string() + ":" + std::to_string(line_no) + ": empty record");
    const std::size_t idx = ds.samples.size();
    ds.samples.push_back({make_sample_id(idx, t), std::move(t), idx});
  };

  if (format_id == "lines") {
    for (std::size_t i = 0; i < lines.size(); ++i) add(i + 1, lines[i]);
  } else if (format_id == "sts") {
    // STS benchmark TSV: genre, file, year, id, score, sentence1, sentence2.
    // Only the main-captions genre is kept and sentence1 is the caption.
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto cols = text::split(lines[i], '\t');
      if (cols.size() < 7) {
        throw LoadError(path.string() + ":" + std::to_string(i + 1) + ": expected 7 tab-separated columns, got " +
                        std::to_string(cols.size()));
      }
      if (cols[0] != "main-captions") continue;
      add(i + 1, cols[5]);
    }
    if (ds.samples.empty()) throw LoadError("no main-captions rows in " + path.string());
  } else {
    throw LoadError("unknown dataset format '" + std::string(format_id) + "'");
  }
  ds.declared_size = ds.samples.size();

  std::set<std::string> seen;
  std::size_t duplicates = 0;
  for (const auto& s : ds.samples) {
    if (!seen.insert(s.text).second) ++duplicates;
  }
  if (duplicates > 0) {
    ds.warnings.push_back(ds.id + ": " + std::to_string(duplicates) + " duplicate text(s) kept as-is");
  }
  if (expected_size && *expected_size != ds.declared_size) {
    ds.warnings.push_back(ds.id + ": expected " + std::to_string(*expected_size) + " samples, loaded " +
                          std::to_string(ds.declared_size));
  }
  return ds;
}

/// Row of the dataset manifest JSON.
struct DatasetEntry {
  std::string id;
  std::string name;
  std::size_t expected_size = 0;
  std::string loader;
  std::filesystem::path path;
  bool story = false;
};

inline std::vector<DatasetEntry> load_dataset_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw LoadError("cannot open dataset manifest " + manifest.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw LoadError("dataset manifest must be a JSON array");
  std::vector<DatasetEntry> out;
  for (const auto& row : j) {
    DatasetEntry e;
    e.id = row.at("id").get<std::string>();
    e.name = row.value("name", e.id);
    e.expected_size = row.value("expected_size", std::size_t{0});
    e.loader = row.value("loader", std::string("lines"));
    e.story = row.value("class", std::string("text")) == "story";
    if (row.contains("path")) {
      e.path = manifest.parent_path() / row["path"].get<std::string>();
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline Dataset load_dataset(const DatasetEntry& entry) {
  std::optional<std::size_t> expected;
  if (entry.expected_size > 0) expected = entry.expected_size;
  Dataset ds = load_dataset(entry.path, entry.loader, entry.id, entry.name, expected);
  ds.story = entry.story;
  return ds;
}

/// What the grid needs to know about a technique.
struct Capability {
  std::string technique_id;
  std::set<Attribute> supported;
  bool prompting = false;
};

struct ExperimentCell {
  std::string technique_id;
  std::string dataset_id;
  std::int64_t seed = 0;
  PromptMode prompt_mode = PromptMode::None;
  ControlSpec control;
  std::string sample_id;
  std::size_t sample_index = 0;

  /// Record key: technique|mode|dataset|attribute|value|seed|sample.
  std::string key() const {
    return technique_id + "|" + to_string(prompt_mode) + "|" + dataset_id + "|" +
           to_string(control.attribute) + "|" + control.value_id() + "|" + std::to_string(seed) +
           "|" + sample_id;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["technique_id"] = technique_id;
    j["prompt_mode"] = to_string(prompt_mode);
    j["dataset_id"] = dataset_id;
    j["attribute"] = to_string(control.attribute);
    j["control"] = control.value_id();
    j["seed"] = seed;
    j["sample_id"] = sample_id;
    return j;
  }

  static ExperimentCell from_json(const nlohmann::json& j) {
    ExperimentCell c;
    c.technique_id = j.at("technique_id").get<std::string>();
    c.prompt_mode = parse_prompt_mode(j.value("prompt_mode", std::string("none")));
    c.dataset_id = j.at("dataset_id").get<std::string>();
    c.control = ControlSpec::parse(parse_attribute(j.at("attribute").get<std::string>()),
                                   j.at("control").get<std::string>());
    c.seed = j.at("seed").get<std::int64_t>();
    c.sample_id = j.at("sample_id").get<std::string>();
    const auto dash = c.sample_id.find('-');
    c.sample_index = dash == std::string::npos ? 0 : std::stoul(c.sample_id.substr(0, dash));
    return c;
  }
};

/// Canonical cell order: technique, prompt mode, dataset, attribute,
/// control value (table order), seed, sample position.
inline auto canonical_key(const ExperimentCell& c) {
  return std::make_tuple(c.technique_id, static_cast<int>(c.prompt_mode), c.dataset_id,
                         static_cast<int>(c.control.attribute), control_order(c.control),
                         c.control.value_id(), c.seed, c.sample_index);
}

inline void canonical_sort(std::vector<ExperimentCell>& cells) {
  using Key = decltype(canonical_key(cells.front()));
  std::vector<std::pair<Key, std::size_t>> keyed;
  keyed.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) keyed.emplace_back(canonical_key(cells[i]), i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<ExperimentCell> sorted;
  sorted.reserve(cells.size());
  for (const auto& [key, i] : keyed) sorted.push_back(std::move(cells[i]));
  cells = std::move(sorted);
}

struct GridConfig {
  std::vector<Capability> techniques;
  std::vector<Attribute> attributes;
  std::vector<const Dataset*> datasets;
  std::vector<std::int64_t> seeds = kDefaultSeeds;
  std::vector<PromptMode> prompt_modes = {PromptMode::ZeroShot, PromptMode::FewShot};
  /// Optional restriction of control values per attribute; empty = all.
  std::map<Attribute, std::vector<ControlSpec>> values;
};

struct Grid {
  std::vector<ExperimentCell> cells;
  std::vector<std::string> skipped;  // one reason per skipped combination
};

inline Grid expand_grid(const GridConfig& config) {
  Grid grid;
  for (const auto& tech : config.techniques) {
    std::vector<PromptMode> modes;
    if (tech.prompting) {
      for (auto m : config.prompt_modes)
        if (m != PromptMode::None) modes.push_back(m);
      if (modes.empty()) {
        grid.skipped.push_back(tech.technique_id + ": prompting technique but no prompt mode configured");
        continue;
      }
    } else {
      modes.push_back(PromptMode::None);
    }
    for (auto attribute : config.attributes) {
      if (!tech.supported.contains(attribute)) {
        grid.skipped.push_back(tech.technique_id + " x " + to_string(attribute) +
                               ": attribute not supported by technique");
        continue;
      }
      const auto it = config.values.find(attribute);
      const auto values = it != config.values.end() && !it->second.empty() ? it->second
                                                                           : control_values(attribute);
      for (const auto* ds : config.datasets) {
        for (auto mode : modes)
          for (const auto& value : values)
            for (auto seed : config.seeds)
              for (const auto& sample : ds->samples) {
                grid.cells.push_back({tech.technique_id, ds->id, seed, mode, value, sample.id, sample.index});
              }
      }
    }
  }
  if (!grid.cells.empty()) canonical_sort(grid.cells);
  return grid;
}

inline void write_grid_jsonl(const std::vector<ExperimentCell>& cells, std::ostream& out) {
  for (const auto& c : cells) out << c.to_json().dump() << '\n';
}

}  // namespace lpf
