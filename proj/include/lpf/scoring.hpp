#pragma once

// Client side of every model-derived quantity: classifier verdicts,
// token log-probabilities, generation passthrough and model manifests.
// Backends are pluggable; the cache is content-addressed and append-only.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpf/corpus.hpp"
#include "lpf/digest.hpp"
#include "lpf/error.hpp"
#include "lpf/stats.hpp"
#include "lpf/text.hpp"

namespace lpf {

using LabelProbs = std::map<std::string, double>;

/// How a classifier reports: one distribution over all labels, or an
/// independent probability per topic (binary-per-topic models).
enum class VerdictStyle { Distribution, PerTopicBinary };

struct ClassifierSpec {
  std::string id;
  Attribute task = Attribute::Sentiment;  // Sentiment or Topic
  VerdictStyle style = VerdictStyle::Distribution;

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    if (task == Attribute::Sentiment) {
      for (auto s : kAllSentiments) out.push_back(to_string(s));
    } else {
      for (auto t : kAllTopics) out.push_back(to_string(t));
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct ClassifierVerdict {
  std::string classifier_id;
  LabelProbs label_probs;
  VerdictStyle style = VerdictStyle::Distribution;

  friend bool operator==(const ClassifierVerdict&, const ClassifierVerdict&) = default;
};

/// Argmax topic from per-topic probabilities; exact ties resolve to the
/// lexicographically smallest canonical id.
inline std::string topic_label_from_binary(const LabelProbs& per_topic) {
  std::string best;
  double best_p = -1.0;
  for (auto t : kAllTopics) {
    const auto it = per_topic.find(to_string(t));
    if (it == per_topic.end()) throw PreconditionError("binary topic verdict lacks " + to_string(t));
  }
  // std::map iterates in lexicographic order, so strict > keeps the first.
  for (const auto& [label, p] : per_topic) {
    if (p > best_p) {
      best_p = p;
      best = label;
    }
  }
  return best;
}

/// Argmax label with the same lexicographic tie rule.
inline std::string predicted_label(const ClassifierVerdict& v) {
  if (v.style == VerdictStyle::PerTopicBinary) return topic_label_from_binary(v.label_probs);
  if (v.label_probs.empty()) throw PreconditionError("empty verdict from " + v.classifier_id);
  std::string best;
  double best_p = -1.0;
  for (const auto& [label, p] : v.label_probs) {
    if (p > best_p) {
      best_p = p;
      best = label;
    }
  }
  return best;
}

/// Maps wire labels to canonical ids and checks the probability vector.
inline ClassifierVerdict make_verdict(const ClassifierSpec& spec, const LabelProbs& wire) {
  ClassifierVerdict v{spec.id, {}, spec.style};
  for (const auto& [label, p] : wire) {
    std::string canon;
    try {
      canon = spec.task == Attribute::Sentiment ? to_string(parse_sentiment(label)) : to_string(parse_topic(label));
    } catch (const ConfigError&) {
      throw ProtocolError(spec.id + ": unexpected label '" + label + "'");
    }
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw ProtocolError(spec.id + ": probability for '" + label + "' outside [0,1]");
    }
    if (!v.label_probs.emplace(canon, p).second) throw ProtocolError(spec.id + ": duplicate label " + canon);
  }
  const auto expected = spec.labels();
  std::vector<std::string> got;
  for (const auto& [label, p] : v.label_probs) got.push_back(label);
  if (got != expected) throw ProtocolError(spec.id + ": label set does not match the classifier task");
  if (spec.style == VerdictStyle::Distribution) {
    stats::KahanSum total;
    for (const auto& [label, p] : v.label_probs) total.add(p);
    if (std::abs(total.value() - 1.0) > 1e-6) {
      throw ProtocolError(spec.id + ": probabilities sum to " + std::to_string(total.value()));
    }
  }
  return v;
}

struct SequenceScore {
  std::string model_id;
  std::vector<std::string> tokens;
  std::vector<double> cond_logprobs;     // ln p(t_i | t_<i), nats
  std::vector<double> unigram_logprobs;  // ln p(t_i), nats
  double sequence_logprob = 0.0;         // backend whole-sequence ln p_M(S)

  std::size_t length() const { return tokens.size(); }
  double log_p() const { return stats::sum(cond_logprobs); }
  double log_p_unigram() const { return stats::sum(unigram_logprobs); }

  /// Throws ProtocolError on any violation of the score contract.
  void validate() const {
    if (tokens.empty()) throw EmptySequence(model_id + ": text tokenizes to zero tokens");
    if (cond_logprobs.size() != tokens.size() || unigram_logprobs.size() != tokens.size()) {
      throw ProtocolError(model_id + ": token and log-prob list lengths disagree");
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!std::isfinite(cond_logprobs[i]) || cond_logprobs[i] > 0.0 || !std::isfinite(unigram_logprobs[i]) ||
          unigram_logprobs[i] > 0.0) {
        throw ProtocolError(model_id + ": log-probability at position " + std::to_string(i) +
                            " is positive or non-finite");
      }
    }
    if (std::abs(log_p() - sequence_logprob) > 1e-4) {
      throw ProtocolError(model_id + ": conditional log-probs sum to " + std::to_string(log_p()) +
                          " but sequence log-prob is " + std::to_string(sequence_logprob));
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["model_id"] = model_id;
    j["tokens"] = tokens;
    j["cond_logprobs"] = cond_logprobs;
    j["unigram_logprobs"] = unigram_logprobs;
    j["sequence_logprob"] = sequence_logprob;
    return j;
  }

  static SequenceScore from_json(const nlohmann::json& j, std::string model_id = {}) {
    SequenceScore s;
    try {
      s.model_id = model_id.empty() ? j.value("model_id", std::string()) : std::move(model_id);
      s.tokens = j.at("tokens").get<std::vector<std::string>>();
      s.cond_logprobs = j.at("cond_logprobs").get<std::vector<double>>();
      s.unigram_logprobs = j.at("unigram_logprobs").get<std::vector<double>>();
      s.sequence_logprob = j.contains("sequence_logprob") ? j["sequence_logprob"].get<double>() : s.log_p();
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("malformed score response: " + std::string(e.what()));
    }
    return s;
  }
};

enum class ModelRole { Classifier, FluencyLM, Generator };

inline std::string to_string(ModelRole r) {
  switch (r) {
    case ModelRole::Classifier: return "classifier";
    case ModelRole::FluencyLM: return "fluency_lm";
    case ModelRole::Generator: return "generator";
  }
  return "?";
}

inline ModelRole parse_model_role(std::string_view s) {
  const std::string l = text::lowercase(s);
  if (l == "classifier") return ModelRole::Classifier;
  if (l == "fluency_lm" || l == "fluencylm" || l == "lm") return ModelRole::FluencyLM;
  if (l == "generator") return ModelRole::Generator;
  throw ManifestError("unknown model role '" + std::string(s) + "'");
}

struct ModelManifest {
  std::string model_id;
  ModelRole role = ModelRole::Generator;
  std::vector<std::pair<std::string, std::uint64_t>> components;
  std::uint64_t total_bytes = 0;

  void validate() const {
    std::uint64_t sum = 0;
    for (const auto& [name, bytes] : components) sum += bytes;
    if (sum != total_bytes) {
      throw ManifestError(model_id + ": total_bytes " + std::to_string(total_bytes) +
                          " differs from component sum " + std::to_string(sum));
    }
  }

  double total_gb() const { return static_cast<double>(total_bytes) / 1e9; }

  static ModelManifest from_json(const nlohmann::json& j) {
    ModelManifest m;
    try {
      m.model_id = j.at("model_id").get<std::string>();
      m.role = parse_model_role(j.at("role").get<std::string>());
      const auto& comps = j.at("components");
      if (comps.is_array()) {
        // Ordered form: [{"name":..., "bytes":...}, ...]
        for (const auto& c : comps) m.components.emplace_back(c.at("name").get<std::string>(), c.at("bytes").get<std::uint64_t>());
      } else {
        for (const auto& [name, bytes] : comps.items()) m.components.emplace_back(name, bytes.get<std::uint64_t>());
      }
      if (j.contains("total_bytes")) {
        m.total_bytes = j["total_bytes"].get<std::uint64_t>();
      } else {
        for (const auto& [name, bytes] : m.components) m.total_bytes += bytes;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError("malformed model manifest: " + std::string(e.what()));
    }
    m.validate();
    return m;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["model_id"] = model_id;
    j["role"] = to_string(role);
    nlohmann::ordered_json comps = nlohmann::ordered_json::array();
    for (const auto& [name, bytes] : components) comps.push_back({{"name", name}, {"bytes", bytes}});
    j["components"] = comps;
    j["total_bytes"] = total_bytes;
    return j;
  }
};

inline std::vector<ModelManifest> load_manifests(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open model manifest file " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw ManifestError("model manifest file must be a JSON array");
  std::vector<ModelManifest> out;
  for (const auto& row : j) out.push_back(ModelManifest::from_json(row));
  return out;
}

/// A text plus the record it belongs to. Live backends ignore the key;
/// replay backends look records up by it.
struct TextItem {
  std::string record_key;
  std::string text;
};

struct GenerateRequest {
  std::string record_key;
  std::string model_id;
  std::string prompt;
  std::int64_t seed = 0;
  nlohmann::json params = nlohmann::json::object();
};

struct GenerateResult {
  std::string text;
  double wall_ms = 0.0;
};

/// What a phase will ask of the backend, used for replay preflight.
struct Need {
  std::string kind;  // classify | score | generate
  std::string model_id;
  std::string record_key;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::vector<LabelProbs> classify(const std::string& model_id, const std::vector<TextItem>& items) = 0;
  virtual SequenceScore score(const std::string& model_id, const TextItem& item) = 0;
  virtual GenerateResult generate(const GenerateRequest& request) = 0;
  virtual std::vector<ModelManifest> models() = 0;
  /// Keys this backend cannot serve. Live backends can serve anything.
  virtual std::vector<std::string> missing(const std::vector<Need>&) { return {}; }
  virtual std::string describe() const = 0;
  virtual std::uint64_t network_calls() const { return 0; }
};

inline std::string replay_key(std::string_view kind, std::string_view model_id, std::string_view record_key) {
  return std::string(kind) + "|" + std::string(model_id) + "|" + std::string(record_key);
}

/// Serves recorded responses from JSONL files in a directory. Every line
/// holds {kind, model_id, key, ...payload}; `models.json` (optional)
/// holds manifests.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(const std::filesystem::path& dir) : dir_(dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("replay directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) load_file(f);
    const auto manifest = dir / "models.json";
    if (std::filesystem::exists(manifest)) manifests_ = load_manifests(manifest);
  }

  void load_file(const std::filesystem::path& f) {
    std::ifstream in(f);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("kind") || !j.contains("model_id") || !j.contains("key")) {
        throw LoadError(f.string() + ":" + std::to_string(line_no) + ": malformed replay record");
      }
      const auto k = replay_key(j["kind"].get<std::string>(), j["model_id"].get<std::string>(),
                                j["key"].get<std::string>());
      records_.insert_or_assign(k, std::move(j));
    }
  }

  std::vector<LabelProbs> classify(const std::string& model_id, const std::vector<TextItem>& items) override {
    std::vector<LabelProbs> out;
    std::vector<std::string> missing_keys;
    for (const auto& item : items) {
      const auto* r = find("classify", model_id, item.record_key);
      if (!r) {
        missing_keys.push_back(replay_key("classify", model_id, item.record_key));
        continue;
      }
      LabelProbs probs;
      for (const auto& [label, p] : r->at("labels").items()) probs[label] = p.get<double>();
      out.push_back(std::move(probs));
    }
    if (!missing_keys.empty()) throw MissingRecord(std::move(missing_keys));
    return out;
  }

  SequenceScore score(const std::string& model_id, const TextItem& item) override {
    const auto* r = find("score", model_id, item.record_key);
    if (!r) throw MissingRecord({replay_key("score", model_id, item.record_key)});
    return SequenceScore::from_json(*r, model_id);
  }

  GenerateResult generate(const GenerateRequest& request) override {
    const auto* r = find("generate", request.model_id, request.record_key);
    if (!r) throw MissingRecord({replay_key("generate", request.model_id, request.record_key)});
    return {r->at("text").get<std::string>(), r->value("wall_ms", 0.0)};
  }

  std::vector<ModelManifest> models() override { return manifests_; }

  std::vector<std::string> missing(const std::vector<Need>& needs) override {
    std::vector<std::string> out;
    for (const auto& n : needs) {
      if (!find(n.kind, n.model_id, n.record_key)) out.push_back(replay_key(n.kind, n.model_id, n.record_key));
    }
    return out;
  }

  std::string describe() const override { return "replay:" + dir_.string(); }

  std::size_t size() const { return records_.size(); }

 private:
  const nlohmann::json* find(std::string_view kind, std::string_view model_id, std::string_view key) const {
    const auto it = records_.find(replay_key(kind, model_id, key));
    return it == records_.end() ? nullptr : &it->second;
  }

  std::filesystem::path dir_;
  std::unordered_map<std::string, nlohmann::json> records_;
  std::vector<ModelManifest> manifests_;
};

/// Append-only JSONL cache keyed by sha256(kind, model_id, trimmed text).
/// Each line carries a checksum of its key and value; lines that fail the
/// check are ignored and counted.
class ScoreCache {
 public:
  explicit ScoreCache(std::filesystem::path dir) : path_(std::move(dir) / "scores.cache.jsonl") {
    std::filesystem::create_directories(path_.parent_path());
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("key") || !j.contains("value") || !j.contains("checksum") ||
          checksum(j["key"].get<std::string>(), j["value"]) != j["checksum"].get<std::string>()) {
        ++corrupt_;
        continue;
      }
      entries_.emplace(j["key"].get<std::string>(), j["value"]);
    }
  }

  static std::string content_key(std::string_view kind, std::string_view model_id, std::string_view text) {
    std::string material(kind);
    material += '\n';
    material += model_id;
    material += '\n';
    material += text::trim(text);
    return sha256_hex(material);
  }

  std::optional<nlohmann::json> get(const std::string& key) const {
    std::lock_guard lock(mu_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return std::optional<nlohmann::json>(std::in_place, it->second);
  }

  /// First write wins; later writes for the same key are dropped, so a
  /// warm read always equals the first cold response.
  nlohmann::json put(const std::string& key, const nlohmann::json& value) {
    std::lock_guard lock(mu_);
    const auto [it, inserted] = entries_.emplace(key, value);
    if (inserted) {
      std::ofstream out(path_, std::ios::app | std::ios::binary);
      nlohmann::ordered_json line;
      line["key"] = key;
      line["value"] = value;
      line["checksum"] = checksum(key, value);
      out << line.dump() << '\n';
      if (!out) throw Error("cannot append to score cache " + path_.string());
    }
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }
  std::size_t corrupt_lines() const { return corrupt_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  static std::string checksum(const std::string& key, const nlohmann::json& value) {
    return sha256_hex(key + "\n" + value.dump()).substr(0, 16);
  }

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, nlohmann::json> entries_;
  std::size_t corrupt_ = 0;
};

/// Front door for model-derived quantities: cache first, then backend,
/// with validation on the way in and a bound on in-flight requests.
class ScoringClient {
 public:
  ScoringClient(Backend& backend, ScoreCache* cache = nullptr, std::ptrdiff_t max_in_flight = 4)
      : backend_(backend), cache_(cache), slots_(std::clamp<std::ptrdiff_t>(max_in_flight, 1, 256)) {}

  std::vector<ClassifierVerdict> classify(const ClassifierSpec& spec, const std::vector<TextItem>& items) {
    std::vector<std::optional<ClassifierVerdict>> out(items.size());
    std::vector<TextItem> todo;
    std::vector<std::size_t> todo_pos;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (cache_) {
        if (auto hit = cache_->get(ScoreCache::content_key("classify", spec.id, items[i].text))) {
          out[i] = make_verdict(spec, hit->get<LabelProbs>());
          continue;
        }
      }
      todo.push_back(items[i]);
      todo_pos.push_back(i);
    }
    if (!todo.empty()) {
      std::vector<LabelProbs> fresh;
      {
        Slot slot(slots_);
        fresh = backend_.classify(spec.id, todo);
      }
      if (fresh.size() != todo.size()) {
        throw ProtocolError(spec.id + ": " + std::to_string(fresh.size()) + " verdicts for " +
                            std::to_string(todo.size()) + " texts");
      }
      for (std::size_t k = 0; k < todo.size(); ++k) {
        auto v = make_verdict(spec, fresh[k]);
        if (cache_) {
          const auto stored = cache_->put(ScoreCache::content_key("classify", spec.id, todo[k].text),
                                          nlohmann::json(v.label_probs));
          v = make_verdict(spec, stored.get<LabelProbs>());
        }
        out[todo_pos[k]] = std::move(v);
      }
    }
    std::vector<ClassifierVerdict> result;
    result.reserve(out.size());
    for (auto& v : out) result.push_back(std::move(*v));
    return result;
  }

  SequenceScore score_sequence(const std::string& model_id, const TextItem& item) {
    if (text::trim(item.text).empty()) throw EmptySequence(model_id + ": empty text for " + item.record_key);
    const auto key = ScoreCache::content_key("score", model_id, item.text);
    SequenceScore s;
    if (cache_) {
      if (auto hit = cache_->get(key)) {
        s = SequenceScore::from_json(*hit, model_id);
        s.validate();
        return s;
      }
    }
    {
      Slot slot(slots_);
      s = backend_.score(model_id, item);
    }
    s.model_id = model_id;
    s.validate();
    check_unigrams(s);
    if (cache_) s = SequenceScore::from_json(cache_->put(key, nlohmann::json(s.to_json())), model_id);
    return s;
  }

  GenerateResult generate(const GenerateRequest& request) {
    Slot slot(slots_);
    const auto start = std::chrono::steady_clock::now();
    auto r = backend_.generate(request);
    if (r.wall_ms <= 0.0) {
      r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    return r;
  }

  ModelManifest fetch_manifest(const std::string& model_id) {
    std::lock_guard lock(manifest_mu_);
    if (!manifests_) manifests_ = backend_.models();
    for (const auto& m : *manifests_) {
      if (m.model_id == model_id) {
        m.validate();
        return m;
      }
    }
    throw ManifestError("no manifest for model '" + model_id + "'");
  }

  /// Replay preflight: throws MissingRecord listing every unserved need.
  void preflight(const std::vector<Need>& needs) {
    auto missing = backend_.missing(needs);
    if (!missing.empty()) throw MissingRecord(std::move(missing));
  }

  Backend& backend() { return backend_; }

 private:
  struct Slot {
    explicit Slot(std::counting_semaphore<256>& s) : sem(s) { sem.acquire(); }
    ~Slot() { sem.release(); }
    std::counting_semaphore<256>& sem;
  };

  /// The unigram log-prob of a token is context-free, so it must agree
  /// across every sequence the token appears in.
  void check_unigrams(const SequenceScore& s) {
    std::lock_guard lock(unigram_mu_);
    auto& table = unigrams_[s.model_id];
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const auto [it, inserted] = table.emplace(s.tokens[i], s.unigram_logprobs[i]);
      if (!inserted && std::abs(it->second - s.unigram_logprobs[i]) > 1e-4) {
        throw ProtocolError(s.model_id + ": inconsistent unigram log-prob for token '" + s.tokens[i] + "'");
      }
    }
  }

  Backend& backend_;
  ScoreCache* cache_;
  std::counting_semaphore<256> slots_;
  std::mutex unigram_mu_;
  std::unordered_map<std::string, std::unordered_map<std::string, double>> unigrams_;
  std::mutex manifest_mu_;
  std::optional<std::vector<ModelManifest>> manifests_;
};

}  // namespace lpf
