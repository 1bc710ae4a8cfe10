#pragma once

// Live backend speaking the bridge's JSON-over-HTTP protocol:
//   POST /classify  {model_id, texts}            -> {verdicts:[{labels:{...}}]}
//   POST /score     {model_id, text}             -> {tokens, cond_logprobs, unigram_logprobs, sequence_logprob}
//   POST /generate  {model_id, prompt, seed, params} -> {text, wall_ms}
//   GET  /models                                 -> [{model_id, role, components, total_bytes}]

#include <atomic>
#include <chrono>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lpf/error.hpp"
#include "lpf/scoring.hpp"

namespace lpf {

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(std::string endpoint, std::chrono::seconds timeout = std::chrono::seconds(300))
      : endpoint_(std::move(endpoint)), timeout_(timeout) {}

  std::vector<LabelProbs> classify(const std::string& model_id, const std::vector<TextItem>& items) override {
    nlohmann::json body{{"model_id", model_id}, {"texts", nlohmann::json::array()}};
    for (const auto& item : items) body["texts"].push_back(item.text);
    const auto resp = post("/classify", body);
    std::vector<LabelProbs> out;
    try {
      for (const auto& v : resp.at("verdicts")) {
        LabelProbs probs;
        for (const auto& [label, p] : v.at("labels").items()) probs[label] = p.get<double>();
        out.push_back(std::move(probs));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("/classify: " + std::string(e.what()));
    }
    return out;
  }

  SequenceScore score(const std::string& model_id, const TextItem& item) override {
    const auto resp = post("/score", {{"model_id", model_id}, {"text", item.text}});
    if (!resp.contains("sequence_logprob")) throw ProtocolError("/score: missing sequence_logprob");
    return SequenceScore::from_json(resp, model_id);
  }

  GenerateResult generate(const GenerateRequest& request) override {
    const auto resp = post("/generate", {{"model_id", request.model_id},
                                         {"prompt", request.prompt},
                                         {"seed", request.seed},
                                         {"params", request.params}});
    try {
      return {resp.at("text").get<std::string>(), resp.value("wall_ms", 0.0)};
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("/generate: " + std::string(e.what()));
    }
  }

  std::vector<ModelManifest> models() override {
    auto cli = client();
    ++calls_;
    const auto res = cli->Get("/models");
    const auto j = check("/models", res);
    if (!j.is_array()) throw ProtocolError("/models: expected a JSON array");
    std::vector<ModelManifest> out;
    for (const auto& row : j) out.push_back(ModelManifest::from_json(row));
    return out;
  }

  /// Cheap reachability probe used before a phase starts.
  bool reachable() {
    auto cli = client();
    cli->set_connection_timeout(std::chrono::seconds(2));
    const auto res = cli->Get("/models");
    return static_cast<bool>(res);
  }

  std::string describe() const override { return "http:" + endpoint_; }
  std::uint64_t network_calls() const override { return calls_.load(); }

 private:
  std::unique_ptr<httplib::Client> client() const {
    auto cli = std::make_unique<httplib::Client>(endpoint_);
    cli->set_connection_timeout(std::chrono::seconds(10));
    cli->set_read_timeout(timeout_);
    cli->set_write_timeout(timeout_);
    return cli;
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    auto cli = client();
    ++calls_;
    const auto res = cli->Post(path, body.dump(), "application/json");
    return check(path, res);
  }

  nlohmann::json check(const std::string& path, const httplib::Result& res) const {
    if (!res) {
      throw TransportError(endpoint_ + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw ProtocolError(endpoint_ + path + ": HTTP " + std::to_string(res->status) + " " + res->body);
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw ProtocolError(endpoint_ + path + ": response is not JSON");
    return j;
  }

  std::string endpoint_;
  std::chrono::seconds timeout_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace lpf
