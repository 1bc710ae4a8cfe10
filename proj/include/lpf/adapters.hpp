#pragma once

// Per-technique I/O contracts: input formatting, topic-label mapping,
// prompt rendering and output postprocessing. Profiles are data files.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpf/corpus.hpp"
#include "lpf/error.hpp"
#include "lpf/text.hpp"
#include "lpf/toml_json.hpp"

namespace lpf {

inline constexpr std::string_view kEndOfText = "<|endoftext|>";

enum class Family { CompleteTraining, FineTuning, TokenDistribution, Prompting, Hybrid };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::CompleteTraining: return "complete_training";
    case Family::FineTuning: return "fine_tuning";
    case Family::TokenDistribution: return "token_distribution";
    case Family::Prompting: return "prompting";
    case Family::Hybrid: return "hybrid";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (auto f : {Family::CompleteTraining, Family::FineTuning, Family::TokenDistribution,
                 Family::Prompting, Family::Hybrid}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown technique family '" + std::string(s) + "'");
}

enum class PostprocessRule {
  Identity,
  StripControl,        // leading control value
  StripEot,            // leading end-of-text token
  StripEotAndControl,  // leading end-of-text token, then control value
  StripPrompt,         // echoed prompt
  StripPromptFalcon,   // echoed prompt, then text between "Falcon:" and "User:"
  TruncateAtEot,       // keep text before the first end-of-text token
};

inline std::string to_string(PostprocessRule r) {
  switch (r) {
    case PostprocessRule::Identity: return "identity";
    case PostprocessRule::StripControl: return "strip_control";
    case PostprocessRule::StripEot: return "strip_eot";
    case PostprocessRule::StripEotAndControl: return "strip_eot_and_control";
    case PostprocessRule::StripPrompt: return "strip_prompt";
    case PostprocessRule::StripPromptFalcon: return "strip_prompt_falcon";
    case PostprocessRule::TruncateAtEot: return "truncate_at_eot";
  }
  return "?";
}

inline PostprocessRule parse_postprocess_rule(std::string_view s) {
  for (auto r : {PostprocessRule::Identity, PostprocessRule::StripControl, PostprocessRule::StripEot,
                 PostprocessRule::StripEotAndControl, PostprocessRule::StripPrompt,
                 PostprocessRule::StripPromptFalcon, PostprocessRule::TruncateAtEot}) {
    if (to_string(r) == s) return r;
  }
  throw ConfigError("unknown postprocess rule '" + std::string(s) + "'");
}

enum class DatasetClass { FreeText, Story };

struct PromptTemplate {
  std::string technique_id;
  PromptMode prompt_mode = PromptMode::ZeroShot;
  DatasetClass dataset_class = DatasetClass::FreeText;
  bool multiple = false;
  std::string template_text;
};

struct TechniqueProfile {
  std::string technique_id;
  std::string display_name;
  Family family = Family::Hybrid;
  std::set<Attribute> supported_attributes;
  std::string input_template = "{text}";
  /// Canonical topic -> native labels. An empty list means Unsupported.
  std::map<Topic, std::vector<std::string>> topic_map;
  /// Chosen label per topic when the mapping lists several; defaults to
  /// the first listed.
  std::map<Topic, std::string> topic_choice;
  PostprocessRule postprocess_rule = PostprocessRule::Identity;
  /// Keyed "zs.text", "fs.story.multiple", ...
  std::map<std::string, PromptTemplate> prompts;
  /// Few-shot example values keyed "text.sentiment", "story.keywords", ...
  std::map<std::string, std::vector<std::string>> prompt_examples;
  std::string generator_model_id;
  nlohmann::json hyperparameters = nlohmann::json::object();

  bool prompting() const { return family == Family::Prompting; }

  Capability capability() const { return {technique_id, supported_attributes, prompting()}; }
};

/// Tagged result of map_topic: empty labels means Unsupported.
struct TopicMapping {
  std::vector<std::string> labels;
  bool supported() const { return !labels.empty(); }
};

inline TopicMapping map_topic(const TechniqueProfile& profile, Topic topic) {
  const auto it = profile.topic_map.find(topic);
  if (it == profile.topic_map.end()) return {};
  return {it->second};
}

inline std::string native_topic_label(const TechniqueProfile& profile, Topic topic) {
  const auto mapping = map_topic(profile, topic);
  if (!mapping.supported()) {
    throw UnmappableTopic(profile.technique_id + " has no native label for topic " + to_string(topic));
  }
  const auto choice = profile.topic_choice.find(topic);
  if (choice != profile.topic_choice.end()) return choice->second;
  return mapping.labels.front();
}

namespace detail {

inline std::string prompt_key(PromptMode mode, DatasetClass cls, bool multiple) {
  std::string key = mode == PromptMode::FewShot ? "fs" : "zs";
  key += cls == DatasetClass::Story ? ".story" : ".text";
  if (multiple) key += ".multiple";
  return key;
}

/// Replaces every {name} from `bindings`; throws RenderError on any
/// placeholder left unbound.
inline std::string bind_placeholders(std::string_view tmpl,
                                     const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string name(tmpl.substr(i + 1, close - i - 1));
        const bool looks_like_placeholder =
            !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
              return std::isalnum(c) || c == ' ' || c == '_';
            });
        if (looks_like_placeholder) {
          const auto it = bindings.find(name);
          if (it == bindings.end()) throw RenderError("unbound placeholder {" + name + "}");
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

inline std::string quoted_keywords(const std::vector<std::string>& kws) {
  std::string out;
  for (std::size_t i = 0; i < kws.size(); ++i) out += (i ? ", \"" : "\"") + kws[i] + "\"";
  return out;
}

}  // namespace detail

/// Value of a control as written inside a prompt sentence: lowercase for
/// sentiment and topic, quoted list for keywords.
inline std::string prompt_value(const TechniqueProfile& profile, const ControlSpec& control) {
  switch (control.attribute) {
    case Attribute::Sentiment: return to_string(*control.sentiment);
    case Attribute::Topic: return text::lowercase(native_topic_label(profile, *control.topic));
    case Attribute::Keywords: return detail::quoted_keywords(control.keywords);
    case Attribute::Multiple:
      return to_string(*control.sentiment) + " sentiment and " +
             text::lowercase(native_topic_label(profile, *control.topic)) + " topic";
  }
  return {};
}

inline std::string render_prompt(const PromptTemplate& tmpl, const Sample& sample, const ControlSpec& control,
                                 const TechniqueProfile* profile = nullptr) {
  TechniqueProfile identity;
  for (auto t : kAllTopics) identity.topic_map[t] = {display_name(t)};
  const TechniqueProfile& p = profile ? *profile : identity;

  std::map<std::string, std::string> b;
  b["text"] = sample.text;
  b["story or text"] = tmpl.dataset_class == DatasetClass::Story ? "story" : "text";
  if (control.attribute == Attribute::Multiple) {
    b["sentiment value"] = to_string(*control.sentiment);
    b["topic value"] = text::lowercase(native_topic_label(p, *control.topic));
    b["control attribute"] = "topic";
  } else {
    b["control attribute"] = to_string(control.attribute);
    b["control attribute value"] = prompt_value(p, control);
  }
  const std::string cls = tmpl.dataset_class == DatasetClass::Story ? "story." : "text.";
  const auto ex = p.prompt_examples.find(cls + to_string(control.attribute));
  if (ex != p.prompt_examples.end()) {
    for (std::size_t i = 0; i < ex->second.size(); ++i) {
      b["example " + std::to_string(i + 1) + " value"] = ex->second[i];
    }
  }
  return detail::bind_placeholders(tmpl.template_text, b);
}

/// Formatted generator input plus the bare control value the generator
/// receives out of band (or that postprocessing must strip).
struct FormattedInput {
  std::string text;
  std::string control_value;
};

inline std::string control_value(const TechniqueProfile& profile, const ControlSpec& control) {
  switch (control.attribute) {
    case Attribute::Sentiment: return to_string(*control.sentiment);
    case Attribute::Topic: return native_topic_label(profile, *control.topic);
    case Attribute::Keywords: {
      std::string out;
      for (std::size_t i = 0; i < control.keywords.size(); ++i) out += (i ? " " : "") + control.keywords[i];
      return out;
    }
    case Attribute::Multiple:
      return to_string(*control.sentiment) + "," + native_topic_label(profile, *control.topic);
  }
  return {};
}

inline FormattedInput format_input(const TechniqueProfile& profile, const Sample& sample,
                                   const ControlSpec& control, PromptMode mode, bool story = false) {
  if (!profile.supported_attributes.contains(control.attribute)) {
    throw UnsupportedControl(profile.technique_id + " does not support " + to_string(control.attribute) +
                             " control");
  }
  control.validate();
  FormattedInput out;
  out.control_value = control_value(profile, control);

  if (profile.prompting()) {
    if (mode == PromptMode::None) {
      throw UnsupportedControl(profile.technique_id + " requires a prompt mode");
    }
    const auto key = detail::prompt_key(mode, story ? DatasetClass::Story : DatasetClass::FreeText,
                                        control.attribute == Attribute::Multiple);
    const auto it = profile.prompts.find(key);
    if (it == profile.prompts.end()) {
      throw ConfigError(profile.technique_id + " has no prompt template '" + key + "'");
    }
    out.text = render_prompt(it->second, sample, control, &profile);
    return out;
  }
  if (mode != PromptMode::None) {
    throw UnsupportedControl(profile.technique_id + " is not a prompting technique");
  }
  std::map<std::string, std::string> b{{"text", sample.text},
                                       {"control_attribute_value", out.control_value},
                                       {"keywords", out.control_value}};
  out.text = detail::bind_placeholders(profile.input_template, b);
  return out;
}

struct PostprocessResult {
  std::string text;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string_view lstrip_ascii_ws(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return s;
}

inline std::string_view rstrip_ascii_ws(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

/// Strips repeated leading copies of `prefix`; returns whether any was found.
inline bool strip_repeated(std::string_view& s, std::string_view prefix, bool eat_ws) {
  bool found = false;
  while (!prefix.empty() && text::starts_with(s, prefix)) {
    s.remove_prefix(prefix.size());
    if (eat_ws) s = lstrip_ascii_ws(s);
    found = true;
  }
  return found;
}

inline bool strip_control(std::string_view& s, std::string_view value) {
  bool found = false;
  while (!value.empty() && text::starts_with(s, value)) {
    s.remove_prefix(value.size());
    if (!s.empty() && s.front() == ':') s.remove_prefix(1);
    s = lstrip_ascii_ws(s);
    found = true;
  }
  return found;
}

/// The prompt may be echoed with or without the "<s>" marker and with
/// leading whitespace differences.
inline bool strip_prompt(std::string_view& s, std::string_view prompt) {
  std::string_view bare = lstrip_ascii_ws(prompt);
  if (text::starts_with(bare, "<s>")) bare = lstrip_ascii_ws(bare.substr(3));
  bare = rstrip_ascii_ws(bare);
  bool found = false;
  while (true) {
    std::string_view t = lstrip_ascii_ws(s);
    if (text::starts_with(t, "<s>")) t = lstrip_ascii_ws(t.substr(3));
    if (bare.empty() || !text::starts_with(t, bare)) break;
    s = lstrip_ascii_ws(t.substr(bare.size()));
    found = true;
  }
  return found;
}

}  // namespace detail

inline PostprocessResult postprocess(const TechniqueProfile& profile, std::string_view raw,
                                     const FormattedInput& input) {
  PostprocessResult out;
  std::string_view s = raw;
  const auto warn = [&](std::string msg) { out.warnings.push_back(profile.technique_id + ": " + msg); };

  switch (profile.postprocess_rule) {
    case PostprocessRule::Identity:
      break;
    case PostprocessRule::StripControl:
      if (!detail::strip_control(s, input.control_value)) {
        warn("leading control value '" + input.control_value + "' not found");
      }
      break;
    case PostprocessRule::StripEot:
      if (!detail::strip_repeated(s, kEndOfText, false)) warn("leading end-of-text token not found");
      break;
    case PostprocessRule::StripEotAndControl: {
      bool eot = false;
      bool ctrl = false;
      while (true) {
        const bool e = detail::strip_repeated(s, kEndOfText, false);
        const bool c = detail::strip_control(s, input.control_value);
        eot = eot || e;
        ctrl = ctrl || c;
        if (!e && !c) break;
      }
      if (!eot) warn("leading end-of-text token not found");
      if (!ctrl) warn("leading control value '" + input.control_value + "' not found");
      break;
    }
    case PostprocessRule::StripPrompt:
      if (!detail::strip_prompt(s, input.text)) warn("echoed prompt not found");
      break;
    case PostprocessRule::StripPromptFalcon: {
      const bool echoed = detail::strip_prompt(s, input.text);
      if (!echoed) warn("echoed prompt not found");
      // Templates ending in "Falcon:" open the reply turn themselves.
      const std::string_view prompt_tail = detail::rstrip_ascii_ws(input.text);
      const bool prompt_opens_turn = prompt_tail.ends_with("Falcon:");
      if (!(echoed && prompt_opens_turn)) {
        const auto at = s.find("Falcon:");
        if (at == std::string_view::npos) {
          if (echoed) warn("\"Falcon:\" marker not found");
        } else {
          s = s.substr(at + 7);
        }
      }
      const auto user = s.find("User:");
      if (user == std::string_view::npos) {
        warn("\"User:\" marker not found, keeping text to the end");
      } else {
        s = s.substr(0, user);
      }
      s = detail::rstrip_ascii_ws(detail::lstrip_ascii_ws(s));
      break;
    }
    case PostprocessRule::TruncateAtEot: {
      const auto at = s.find(kEndOfText);
      if (at == std::string_view::npos) {
        warn("end-of-text token not found");
      } else {
        s = s.substr(0, at);
      }
      break;
    }
  }
  out.text = std::string(s);
  return out;
}

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace detail

/// Builds a profile from its JSON form. Prompt asset paths resolve
/// relative to `base_dir`.
inline TechniqueProfile profile_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  TechniqueProfile p;
  try {
    p.technique_id = j.at("id").get<std::string>();
    p.display_name = j.value("name", p.technique_id);
    p.family = parse_family(j.at("family").get<std::string>());
    for (const auto& a : j.at("supported_attributes")) p.supported_attributes.insert(parse_attribute(a.get<std::string>()));
    p.generator_model_id = j.value("generator_model_id", p.technique_id);
    if (j.contains("input")) p.input_template = j["input"].value("template", std::string("{text}"));
    if (j.contains("topic_map")) {
      for (const auto& [name, labels] : j["topic_map"].items()) {
        if (name == "choice") continue;
        std::vector<std::string> ls;
        for (const auto& l : labels) ls.push_back(l.get<std::string>());
        p.topic_map[parse_topic(name)] = std::move(ls);
      }
      if (j["topic_map"].contains("choice")) {
        for (const auto& [name, label] : j["topic_map"]["choice"].items()) {
          const Topic t = parse_topic(name);
          const auto& labels = p.topic_map[t];
          const auto chosen = label.get<std::string>();
          if (std::find(labels.begin(), labels.end(), chosen) == labels.end()) {
            throw ConfigError(p.technique_id + ": topic choice '" + chosen + "' is not a mapped label");
          }
          p.topic_choice[t] = chosen;
        }
      }
    }
    if (j.contains("postprocess")) p.postprocess_rule = parse_postprocess_rule(j["postprocess"].at("rule").get<std::string>());
    if (j.contains("prompts")) {
      for (const auto& [key, value] : j["prompts"].items()) {
        if (key == "examples") {
          for (const auto& [cls, per_attr] : value.items())
            for (const auto& [attr, vals] : per_attr.items())
              p.prompt_examples[cls + "." + attr] = vals.get<std::vector<std::string>>();
          continue;
        }
        // keys: zs_text, fs_story_multiple, ...
        const auto parts = text::split(key, '_');
        if (parts.size() < 2) throw ConfigError(p.technique_id + ": bad prompt key '" + key + "'");
        PromptTemplate t;
        t.technique_id = p.technique_id;
        t.prompt_mode = parse_prompt_mode(parts[0]);
        t.dataset_class = parts[1] == "story" ? DatasetClass::Story : DatasetClass::FreeText;
        t.multiple = parts.size() > 2 && parts[2] == "multiple";
        t.template_text = detail::read_text_file(base_dir / value.get<std::string>());
        p.prompts[detail::prompt_key(t.prompt_mode, t.dataset_class, t.multiple)] = std::move(t);
      }
    }
    if (j.contains("hyperparameters")) p.hyperparameters = j["hyperparameters"];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed technique profile: " + std::string(e.what()));
  }
  if (p.supported_attributes.contains(Attribute::Topic) || p.supported_attributes.contains(Attribute::Multiple)) {
    if (p.topic_map.size() != kAllTopics.size()) {
      throw ConfigError(p.technique_id + ": topic_map must list all four canonical topics");
    }
  }
  if (p.prompting() && p.prompts.empty()) throw ConfigError(p.technique_id + ": prompting profile without prompts");
  return p;
}

inline TechniqueProfile load_profile(const std::filesystem::path& path) {
  return profile_from_json(load_structured_file(path), path.parent_path());
}

/// Loads every *.toml / *.json profile in a directory, keyed by id.
inline std::map<std::string, TechniqueProfile> load_profiles(const std::filesystem::path& dir) {
  std::map<std::string, TechniqueProfile> out;
  if (!std::filesystem::is_directory(dir)) throw ConfigError("profile directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (ext == ".toml" || ext == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto p = load_profile(f);
    const auto id = p.technique_id;
    if (!out.emplace(id, std::move(p)).second) throw ConfigError("duplicate profile id " + id);
  }
  return out;
}

}  // namespace lpf
