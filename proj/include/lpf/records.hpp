#pragma once

// On-disk handoff between phases: generation records and score bundles,
// one JSON object per line. Appends go through a serialized writer.

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpf/corpus.hpp"
#include "lpf/error.hpp"
#include "lpf/scoring.hpp"

namespace lpf {

struct GenerationRecord {
  ExperimentCell cell;
  std::string formatted_input;
  std::string raw_text;
  std::string post_text;
  double wall_ms = 0.0;
  std::vector<std::string> warnings;
  bool failed = false;
  std::string failure;

  std::string key() const { return cell.key(); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["key"] = key();
    j["cell"] = cell.to_json();
    j["formatted_input"] = formatted_input;
    j["raw_text"] = raw_text;
    j["post_text"] = post_text;
    j["wall_ms"] = wall_ms;
    j["warnings"] = warnings;
    j["failed"] = failed;
    if (failed) j["failure"] = failure;
    return j;
  }

  static GenerationRecord from_json(const nlohmann::json& j) {
    GenerationRecord r;
    r.cell = ExperimentCell::from_json(j.at("cell"));
    r.formatted_input = j.value("formatted_input", std::string());
    r.raw_text = j.value("raw_text", std::string());
    r.post_text = j.value("post_text", std::string());
    r.wall_ms = j.value("wall_ms", 0.0);
    r.warnings = j.value("warnings", std::vector<std::string>{});
    r.failed = j.value("failed", false);
    r.failure = j.value("failure", std::string());
    if (r.wall_ms < 0.0) throw LoadError(r.key() + ": negative wall_ms");
    return r;
  }
};

struct ScoreBundle {
  std::string record_key;
  std::map<std::string, ClassifierVerdict> verdicts;  // by classifier id
  std::map<std::string, SequenceScore> sequence_scores;  // by LM id
  bool failed = false;
  std::string failure;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["key"] = record_key;
    nlohmann::ordered_json v = nlohmann::ordered_json::object();
    for (const auto& [id, verdict] : verdicts) {
      nlohmann::ordered_json labels = nlohmann::ordered_json::object();
      for (const auto& [label, p] : verdict.label_probs) labels[label] = p;
      v[id] = {{"style", verdict.style == VerdictStyle::PerTopicBinary ? "per_topic_binary" : "distribution"},
               {"labels", labels}};
    }
    j["verdicts"] = v;
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (const auto& [id, score] : sequence_scores) s[id] = score.to_json();
    j["sequence_scores"] = s;
    j["failed"] = failed;
    if (failed) j["failure"] = failure;
    return j;
  }

  static ScoreBundle from_json(const nlohmann::json& j) {
    ScoreBundle b;
    b.record_key = j.at("key").get<std::string>();
    const auto verdicts = j.value("verdicts", nlohmann::json::object());
    for (const auto& [id, v] : verdicts.items()) {
      ClassifierVerdict verdict;
      verdict.classifier_id = id;
      verdict.style = v.value("style", std::string("distribution")) == "per_topic_binary" ? VerdictStyle::PerTopicBinary
                                                                                        : VerdictStyle::Distribution;
      verdict.label_probs = v.at("labels").get<LabelProbs>();
      b.verdicts.emplace(id, std::move(verdict));
    }
    const auto scores = j.value("sequence_scores", nlohmann::json::object());
    for (const auto& [id, s] : scores.items()) {
      b.sequence_scores.emplace(id, SequenceScore::from_json(s, id));
    }
    b.failed = j.value("failed", false);
    b.failure = j.value("failure", std::string());
    return b;
  }
};

/// Reads a JSONL file, calling `fn(json, line_no)` per non-empty line.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw LoadError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON");
    fn(j, line_no);
  }
}

inline std::vector<GenerationRecord> read_generations(const std::filesystem::path& path) {
  std::vector<GenerationRecord> out;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line_no) {
    try {
      out.push_back(GenerationRecord::from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

inline std::map<std::string, ScoreBundle> read_score_bundles(const std::filesystem::path& path) {
  std::map<std::string, ScoreBundle> out;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line_no) {
    try {
      auto b = ScoreBundle::from_json(j);
      auto key = b.record_key;
      out.insert_or_assign(std::move(key), std::move(b));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

/// All writers of one output file share this; lines never interleave.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::app | std::ios::binary);
    if (!out_) throw Error("cannot open " + path.string() + " for append");
  }

  template <typename J>
  void append(const J& j) {
    const std::string line = j.dump() + "\n";
    std::lock_guard lock(mu_);
    out_ << line;
    out_.flush();
    if (!out_) throw Error("write failed on " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

}  // namespace lpf
