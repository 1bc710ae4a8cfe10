#pragma once

// The three phases (generate, score, evaluate) plus report emission,
// comparison with original results and the classifier benchmark. Every
// phase validates all inputs before writing anything and resumes from
// whatever a previous run left on disk.

#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpf/adapters.hpp"
#include "lpf/aggregate.hpp"
#include "lpf/config.hpp"
#include "lpf/corpus.hpp"
#include "lpf/error.hpp"
#include "lpf/lemmas.hpp"
#include "lpf/metrics.hpp"
#include "lpf/records.hpp"
#include "lpf/report.hpp"
#include "lpf/scoring.hpp"

namespace lpf {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception stops further work and is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first;
  std::mutex mu;
  const auto body = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        stop = true;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t extra = std::min(workers, n) > 0 ? std::min(workers, n) - 1 : 0;
    for (std::size_t k = 0; k < extra; ++k) pool.emplace_back(body);
    body();
  }
  if (first) std::rethrow_exception(first);
}

struct PipelineEnv {
  std::optional<std::filesystem::path> cache_dir;
  std::function<void(const std::string&)> log;
  /// Injected backend (tests); otherwise built from the configuration.
  Backend* backend = nullptr;
  /// Builds a live backend for `backend.endpoint`; it must throw
  /// TransportError when the endpoint does not answer.
  std::function<std::unique_ptr<Backend>(const std::string&)> connect;
};

/// Everything a phase needs, resolved and validated up front.
class Workspace {
 public:
  Workspace(RunConfig config, PipelineEnv env = {}) : config_(std::move(config)), env_(std::move(env)) {
    std::vector<std::string> problems;
    try {
      auto all = load_profiles(config_.profiles_dir);
      for (const auto& id : config_.techniques) {
        const auto it = all.find(id);
        if (it == all.end()) {
          problems.push_back("unknown technique '" + id + "'");
          continue;
        }
        profiles_.emplace(id, std::move(it->second));
      }
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
    try {
      const auto entries = load_dataset_manifest(config_.datasets_manifest);
      for (const auto& id : config_.datasets) {
        const auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.id == id; });
        if (it == entries.end()) {
          problems.push_back("unknown dataset '" + id + "'");
          continue;
        }
        try {
          datasets_.push_back(load_dataset(*it));
        } catch (const Error& e) {
          problems.push_back(e.what());
        }
      }
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
    if (!config_.lemma_base.empty()) {
      try {
        lemmas_ = std::make_unique<TableLemmas>(TableLemmas::from_files(config_.lemma_base, config_.lemma_extended));
      } catch (const Error& e) {
        problems.push_back(e.what());
      }
    } else {
      lemmas_ = std::make_unique<IdentityLemmas>();
    }
    if (!problems.empty()) {
      std::string msg = "invalid run setup:";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw ConfigError(msg);
    }
    for (const auto& d : datasets_) warnings_.insert(warnings_.end(), d.warnings.begin(), d.warnings.end());

    GridConfig g;
    for (const auto& id : config_.techniques) g.techniques.push_back(profiles_.at(id).capability());
    g.attributes = config_.attributes;
    for (const auto& d : datasets_) g.datasets.push_back(&d);
    g.seeds = config_.seeds;
    g.prompt_modes = config_.prompt_modes;
    g.values = config_.values;
    grid_ = expand_grid(g);
    for (const auto& s : grid_.skipped) warnings_.push_back("skipped " + s);
  }

  const RunConfig& config() const { return config_; }
  const std::map<std::string, TechniqueProfile>& profiles() const { return profiles_; }
  const std::vector<Dataset>& datasets() const { return datasets_; }
  const Grid& grid() const { return grid_; }
  const LemmaProvider& lemmas() const { return *lemmas_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  const Dataset& dataset(const std::string& id) const {
    for (const auto& d : datasets_)
      if (d.id == id) return d;
    throw PreconditionError("dataset not loaded: " + id);
  }

  std::string generator_model(const TechniqueProfile& p) const {
    return p.generator_model_id.empty() ? p.technique_id : p.generator_model_id;
  }

  void log(const std::string& msg) const {
    if (env_.log) env_.log(msg);
  }

  /// Backend and client, built on first use. A live endpoint that does
  /// not answer fails here, before any work is done.
  ScoringClient& client() {
    if (client_) return *client_;
    Backend* b = env_.backend;
    if (!b) {
      if (config_.replay_dir) {
        owned_backend_ = std::make_unique<ReplayBackend>(*config_.replay_dir);
      } else if (config_.endpoint) {
        if (!env_.connect) throw ConfigError("this build has no live backend; use backend.replay_dir");
        owned_backend_ = env_.connect(*config_.endpoint);
      } else {
        throw ConfigError("no backend: set backend.replay_dir or backend.endpoint (--replay-dir / --endpoint)");
      }
      b = owned_backend_.get();
    }
    if (env_.cache_dir) cache_ = std::make_unique<ScoreCache>(*env_.cache_dir);
    client_ = std::make_unique<ScoringClient>(*b, cache_.get(), static_cast<std::ptrdiff_t>(config_.max_in_flight));
    return *client_;
  }

  std::string backend_description() const {
    if (env_.backend) return env_.backend->describe();
    if (config_.replay_dir) return "replay";
    if (config_.endpoint) return "http:" + *config_.endpoint;
    return "none";
  }

 private:
  RunConfig config_;
  PipelineEnv env_;
  std::map<std::string, TechniqueProfile> profiles_;
  std::vector<Dataset> datasets_;
  std::unique_ptr<LemmaProvider> lemmas_;
  std::vector<std::string> warnings_;
  Grid grid_;
  std::unique_ptr<Backend> owned_backend_;
  std::unique_ptr<ScoreCache> cache_;
  std::unique_ptr<ScoringClient> client_;
};

// ---------------------------------------------------------------- generate

struct GenerateSummary {
  std::size_t cells = 0;
  std::size_t already_done = 0;
  std::size_t generated = 0;
  std::size_t failed = 0;
  std::uint64_t network_calls = 0;
};

inline std::set<std::string> existing_keys(const std::filesystem::path& path, bool bundles) {
  std::set<std::string> keys;
  if (!std::filesystem::exists(path)) return keys;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    keys.insert(j.at("key").get<std::string>());
    (void)bundles;
  });
  return keys;
}

inline GenerateSummary cmd_generate(Workspace& ws) {
  const auto& cfg = ws.config();
  GenerateSummary sum;
  sum.cells = ws.grid().cells.size();
  const auto done = existing_keys(cfg.generations_path(), false);

  struct Task {
    const ExperimentCell* cell;
    const TechniqueProfile* profile;
    FormattedInput input;
    std::string failure;
  };
  std::vector<Task> tasks;
  std::vector<Need> needs;
  for (const auto& cell : ws.grid().cells) {
    if (done.contains(cell.key())) {
      ++sum.already_done;
      continue;
    }
    const auto& profile = ws.profiles().at(cell.technique_id);
    const auto& ds = ws.dataset(cell.dataset_id);
    Task t{&cell, &profile, {}, {}};
    try {
      t.input = format_input(profile, ds.samples.at(cell.sample_index), cell.control, cell.prompt_mode, ds.story);
      needs.push_back({"generate", ws.generator_model(profile), cell.key()});
    } catch (const UnmappableTopic& e) {
      t.failure = e.what();
    } catch (const UnsupportedControl& e) {
      t.failure = e.what();
    }
    tasks.push_back(std::move(t));
  }
  if (tasks.empty()) return sum;

  auto& client = ws.client();
  client.preflight(needs);
  const auto calls_before = client.backend().network_calls();
  JsonlAppender out(cfg.generations_path());
  std::atomic<std::size_t> generated{0};
  std::atomic<std::size_t> failed{0};

  parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
    const auto& t = tasks[i];
    GenerationRecord rec;
    rec.cell = *t.cell;
    rec.formatted_input = t.input.text;
    if (!t.failure.empty()) {
      rec.failed = true;
      rec.failure = t.failure;
    } else {
      GenerateRequest req;
      req.record_key = t.cell->key();
      req.model_id = ws.generator_model(*t.profile);
      req.prompt = t.input.text;
      req.seed = t.cell->seed;
      req.params = t.profile->hyperparameters;
      for (const auto& [k, v] : cfg.generation_params.items()) req.params[k] = v;
      try {
        const auto r = client.generate(req);
        rec.raw_text = r.text;
        rec.wall_ms = r.wall_ms;
        auto post = postprocess(*t.profile, r.text, t.input);
        rec.post_text = std::move(post.text);
        rec.warnings = std::move(post.warnings);
      } catch (const TransportError& e) {
        rec.failed = true;
        rec.failure = e.what();
      }
    }
    (rec.failed ? failed : generated)++;
    out.append(rec.to_json());
  });
  sum.generated = generated;
  sum.failed = failed;
  sum.network_calls = client.backend().network_calls() - calls_before;
  ws.log("generate: " + std::to_string(sum.generated) + " generated, " + std::to_string(sum.failed) + " failed, " +
         std::to_string(sum.already_done) + " already done");
  return sum;
}

// ---------------------------------------------------------------- score

struct ScoreSummary {
  std::size_t records = 0;
  std::size_t already_done = 0;
  std::size_t scored = 0;
  std::size_t failed = 0;
  std::uint64_t network_calls = 0;
};

inline std::vector<const ClassifierSpec*> classifiers_for(const RunConfig& cfg, Attribute a) {
  std::vector<const ClassifierSpec*> out;
  if (a == Attribute::Sentiment || a == Attribute::Multiple)
    for (const auto& c : cfg.sentiment_classifiers) out.push_back(&c);
  if (a == Attribute::Topic || a == Attribute::Multiple)
    for (const auto& c : cfg.topic_classifiers) out.push_back(&c);
  return out;
}

inline ScoreSummary cmd_score(Workspace& ws) {
  const auto& cfg = ws.config();
  if (!std::filesystem::exists(cfg.generations_path())) {
    throw PreconditionError("no generation records at " + cfg.generations_path().string() + "; run generate first");
  }
  const auto gens = read_generations(cfg.generations_path());
  const auto done = existing_keys(cfg.scores_path(), true);
  ScoreSummary sum;
  sum.records = gens.size();

  std::vector<const GenerationRecord*> todo;
  std::vector<Need> needs;
  for (const auto& g : gens) {
    if (g.failed) continue;
    if (done.contains(g.key())) {
      ++sum.already_done;
      continue;
    }
    todo.push_back(&g);
    for (const auto* c : classifiers_for(cfg, g.cell.control.attribute)) needs.push_back({"classify", c->id, g.key()});
    // Empty texts fail locally without a backend call.
    if (text::trim(g.post_text).empty()) continue;
    for (const auto& m : cfg.fluency_models) needs.push_back({"score", m, g.key()});
  }
  if (todo.empty()) return sum;

  auto& client = ws.client();
  client.preflight(needs);
  const auto calls_before = client.backend().network_calls();
  JsonlAppender out(cfg.scores_path());
  const std::size_t batches = (todo.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::atomic<std::size_t> scored{0};
  std::atomic<std::size_t> failed{0};

  parallel_for(batches, cfg.workers, [&](std::size_t b) {
    const std::size_t lo = b * cfg.batch_size;
    const std::size_t hi = std::min(todo.size(), lo + cfg.batch_size);
    std::vector<ScoreBundle> bundles(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) bundles[i - lo].record_key = todo[i]->key();

    const auto fail = [&](std::size_t i, const std::string& why) {
      bundles[i].failed = true;
      if (bundles[i].failure.empty()) bundles[i].failure = why;
    };

    std::map<std::string, std::pair<const ClassifierSpec*, std::vector<std::size_t>>> by_clf;
    for (std::size_t i = lo; i < hi; ++i)
      for (const auto* c : classifiers_for(cfg, todo[i]->cell.control.attribute)) {
        auto& slot = by_clf[c->id];
        slot.first = c;
        slot.second.push_back(i - lo);
      }
    for (const auto& [id, entry] : by_clf) {
      std::vector<TextItem> items;
      for (auto i : entry.second) items.push_back({todo[lo + i]->key(), todo[lo + i]->post_text});
      try {
        const auto verdicts = client.classify(*entry.first, items);
        for (std::size_t k = 0; k < entry.second.size(); ++k) bundles[entry.second[k]].verdicts[id] = verdicts[k];
      } catch (const TransportError& e) {
        for (auto i : entry.second) fail(i, e.what());
      }
    }
    for (std::size_t i = lo; i < hi; ++i) {
      for (const auto& m : cfg.fluency_models) {
        try {
          bundles[i - lo].sequence_scores[m] = client.score_sequence(m, {todo[i]->key(), todo[i]->post_text});
        } catch (const EmptySequence& e) {
          fail(i - lo, e.what());
        } catch (const TransportError& e) {
          fail(i - lo, e.what());
        }
      }
    }
    for (auto& bundle : bundles) {
      if (bundle.failed) {
        bundle.verdicts.clear();
        bundle.sequence_scores.clear();
      }
      (bundle.failed ? failed : scored)++;
      out.append(bundle.to_json());
    }
  });
  sum.scored = scored;
  sum.failed = failed;
  sum.network_calls = client.backend().network_calls() - calls_before;
  ws.log("score: " + std::to_string(sum.scored) + " scored, " + std::to_string(sum.failed) + " failed, " +
         std::to_string(sum.already_done) + " already done");
  return sum;
}

// ---------------------------------------------------------------- evaluate / report

struct ReportSummary {
  std::filesystem::path dir;
  std::vector<std::string> artifacts;
  std::vector<std::string> warnings;
};

inline std::vector<Pool> load_pools(const RunConfig& cfg) {
  if (!std::filesystem::exists(cfg.generations_path())) {
    throw PreconditionError("no generation records at " + cfg.generations_path().string());
  }
  const auto gens = read_generations(cfg.generations_path());
  std::map<std::string, ScoreBundle> bundles;
  if (std::filesystem::exists(cfg.scores_path())) bundles = read_score_bundles(cfg.scores_path());
  return build_pools(gens, bundles);
}

inline std::vector<MetricCell> read_metric_cells(const std::filesystem::path& path) {
  std::vector<MetricCell> out;
  if (!std::filesystem::exists(path)) throw PreconditionError("no metric cells at " + path.string());
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) { out.push_back(MetricCell::from_json(j)); });
  return out;
}

inline ReportSummary cmd_report(Workspace& ws);

/// Metric cells for every pool, written in pool order, then the report.
inline ReportSummary cmd_evaluate(Workspace& ws) {
  const auto& cfg = ws.config();
  const auto pools = load_pools(cfg);
  MetricSuite suite;
  suite.sentiment_classifiers = cfg.classifier_ids(Attribute::Sentiment);
  suite.topic_classifiers = cfg.classifier_ids(Attribute::Topic);
  suite.fluency_models = cfg.fluency_models;
  suite.lemmas = &ws.lemmas();

  std::vector<PoolResult> results(pools.size());
  parallel_for(pools.size(), cfg.workers, [&](std::size_t i) { results[i] = evaluate_pool(pools[i], suite); });

  std::string lines;
  std::vector<std::string> warnings;
  std::size_t n = 0;
  for (const auto& r : results) {
    for (const auto& c : r.cells) {
      lines += c.to_json().dump() + "\n";
      ++n;
    }
    warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  if (n == 0) throw PreconditionError("evaluation produced no metric cells; refusing to emit an empty report");
  write_file(cfg.metrics_path(), lines);
  write_file(cfg.run_dir() / "evaluate_warnings.json", nlohmann::json(warnings).dump(2) + "\n");
  ws.log("evaluate: " + std::to_string(n) + " metric cells from " + std::to_string(pools.size()) + " pools");
  return cmd_report(ws);
}

namespace detail {

inline ReportContext report_context(const Workspace& ws) {
  ReportContext ctx;
  ctx.technique_order = ws.config().techniques;
  for (const auto& [id, p] : ws.profiles()) ctx.display_names[id] = p.display_name;
  return ctx;
}

inline std::string row_label(const AggregateCell& a) {
  return a.stratum == Stratum::Single ? a.technique_id : a.technique_id + "/" + to_string(a.stratum);
}

/// Correlation between two metrics across table rows, over all rows and
/// over unprompted rows only. Undefined correlations become warnings.
inline void correlate_metrics(const std::vector<AggregateCell>& aggs, Attribute attr, const std::string& ma,
                              const std::string& mb, std::vector<CorrelationReport>& out,
                              std::vector<std::string>& warnings) {
  for (const bool unprompted_only : {false, true}) {
    std::map<std::string, double> a;
    std::map<std::string, double> b;
    for (const auto& c : aggs) {
      if (c.attribute != attr || (unprompted_only && c.stratum != Stratum::Single)) continue;
      if (c.metric == ma) a[row_label(c)] = c.mean;
      if (c.metric == mb) b[row_label(c)] = c.mean;
    }
    const std::string scope = unprompted_only ? " (unprompted)" : " (all rows)";
    const std::string na = to_string(attr) + "." + ma + scope;
    const std::string nb = to_string(attr) + "." + mb + scope;
    if (a.empty() && b.empty()) continue;
    try {
      out.push_back(correlate(na, a, nb, b));
    } catch (const PreconditionError& e) {
      warnings.push_back("correlation " + na + " vs " + nb + " not computed: " + e.what());
    }
  }
}

}  // namespace detail

inline ReportSummary cmd_report(Workspace& ws) {
  const auto& cfg = ws.config();
  const auto metrics = read_metric_cells(cfg.metrics_path());
  if (metrics.empty()) throw PreconditionError("no metric cells; refusing to emit an empty report");
  const auto ctx = detail::report_context(ws);
  const auto aggs = weighted_aggregate(metrics, {cfg.weights, cfg.stdev_axis});

  ReportSummary sum;
  sum.dir = cfg.reports_dir();
  std::vector<std::string> warnings = ws.warnings();
  if (std::filesystem::exists(cfg.run_dir() / "evaluate_warnings.json")) {
    std::ifstream in(cfg.run_dir() / "evaluate_warnings.json");
    for (const auto& w : nlohmann::json::parse(in)) warnings.push_back(w.get<std::string>());
  }
  std::vector<RenderedTable> rendered;

  std::set<Attribute> present;
  for (const auto& a : aggs) present.insert(a.attribute);
  const auto specs = standard_tables(cfg.classifier_ids(Attribute::Sentiment), cfg.classifier_ids(Attribute::Topic),
                                     present, !cfg.fluency_models.empty());
  check_coverage(specs, aggs);
  for (const auto& spec : specs) rendered.push_back(emit_table(spec, aggs, ctx));

  std::vector<CorrelationReport> correlations;
  for (const auto attr : present) {
    if (attr == Attribute::Sentiment || attr == Attribute::Topic) {
      detail::correlate_metrics(aggs, attr, "ce_avg", "ce_mv", correlations, warnings);
    }
    if (!cfg.fluency_models.empty()) detail::correlate_metrics(aggs, attr, "ppl", "slor", correlations, warnings);
  }
  if (!correlations.empty()) rendered.push_back(emit_correlations(correlations));

  // Per-record views: agreement matrices, efficiency, record warnings.
  const auto gens = read_generations(cfg.generations_path());
  const auto pools = load_pools(cfg);
  for (const auto attr : {Attribute::Sentiment, Attribute::Topic}) {
    if (!present.contains(attr)) continue;
    std::vector<Pool> subset;
    for (const auto& p : pools)
      if (p.control.attribute == attr) subset.push_back(p);
    const auto indicators = correctness_indicators(subset, cfg.classifier_ids(attr));
    if (indicators.empty() || indicators.begin()->second.empty()) continue;
    rendered.push_back(emit_agreement("agreement_" + to_string(attr),
                                      "Classifier agreement: " + to_string(attr) + " control",
                                      classifier_agreement(indicators)));
  }

  std::map<std::string, ModelManifest> memory;
  if (cfg.manifests_file) {
    std::map<std::string, ModelManifest> by_model;
    for (auto& m : load_manifests(*cfg.manifests_file)) by_model.emplace(m.model_id, std::move(m));
    for (const auto& [id, p] : ws.profiles()) {
      const auto it = by_model.find(ws.generator_model(p));
      if (it == by_model.end()) {
        warnings.push_back("no memory manifest for " + id);
      } else {
        memory.emplace(id, it->second);
      }
    }
  }
  std::vector<Capability> caps;
  for (const auto& id : cfg.techniques) caps.push_back(ws.profiles().at(id).capability());
  rendered.push_back(emit_efficiency_time(summarize_efficiency(gens, caps, cfg.attributes, memory), ctx,
                                          cfg.attributes));
  if (!memory.empty()) rendered.push_back(emit_efficiency_memory(memory, ctx));

  if (cfg.originals_file) {
    const auto means = dataset_means(metrics);
    const auto rep = compare_original(load_originals(*cfg.originals_file), [&](const OriginalRow& row) {
      const auto it = means.find({row.technique, row.control, row.dataset, "ce_avg"});
      return it == means.end() ? std::optional<double>() : std::optional<double>(it->second);
    });
    rendered.push_back(emit_original_comparison(rep, ctx));
  }

  std::map<std::string, std::size_t> record_warnings;
  for (const auto& g : gens) {
    for (const auto& w : g.warnings) ++record_warnings[g.cell.technique_id + ": " + w];
    if (g.failed) ++record_warnings[g.cell.technique_id + ": failed: " + g.failure];
  }
  for (const auto& [w, count] : record_warnings) warnings.push_back(w + " (x" + std::to_string(count) + ")");

  const auto dir = cfg.reports_dir();
  for (const auto& t : rendered) {
    write_table(dir, t);
    sum.artifacts.push_back(t.id + ".md");
    sum.artifacts.push_back(t.id + ".csv");
  }
  write_file(dir / "aggregates.csv", aggregates_csv(aggs));
  sum.artifacts.push_back("aggregates.csv");

  std::vector<std::string> dataset_ids;
  for (const auto& d : ws.datasets()) dataset_ids.push_back(d.id);
  for (const auto attr : present) {
    std::vector<std::string> controls;
    const auto vit = cfg.values.find(attr);
    for (const auto& v : vit != cfg.values.end() && !vit->second.empty() ? vit->second : control_values(attr))
      controls.push_back(v.value_id());
    const auto chart = emit_chart_data(metrics, attr, dataset_ids, controls);
    warnings.insert(warnings.end(), chart.gaps.begin(), chart.gaps.end());
    const std::string name = "charts/" + to_string(attr);
    write_file(dir / (name + ".json"), chart_json(chart).dump(2) + "\n");
    sum.artifacts.push_back(name + ".json");
    if (cfg.svg && !chart.series.empty()) {
      write_file(dir / (name + ".svg"), chart_svg(chart, ctx));
      sum.artifacts.push_back(name + ".svg");
    }
  }

  nlohmann::ordered_json manifest;
  manifest["run_id"] = cfg.run_id;
  manifest["config_digest"] = cfg.digest();
  manifest["seeds"] = cfg.seeds;
  manifest["stdev_axis"] = to_string(cfg.stdev_axis);
  manifest["backend"] = ws.backend_description();
  nlohmann::ordered_json techniques = nlohmann::ordered_json::object();
  for (const auto& id : cfg.techniques) {
    const auto& p = ws.profiles().at(id);
    techniques[id] = {{"display_name", p.display_name},
                      {"family", to_string(p.family)},
                      {"generator_model_id", ws.generator_model(p)},
                      {"postprocess", to_string(p.postprocess_rule)},
                      {"hyperparameters", nlohmann::ordered_json::parse(p.hyperparameters.dump())}};
  }
  manifest["techniques"] = techniques;
  nlohmann::ordered_json datasets = nlohmann::ordered_json::object();
  for (const auto& d : ws.datasets()) datasets[d.id] = {{"name", d.name}, {"size", d.declared_size}};
  manifest["datasets"] = datasets;
  manifest["weights"] = cfg.weights;
  manifest["warnings"] = warnings;
  std::sort(sum.artifacts.begin(), sum.artifacts.end());
  manifest["artifacts"] = sum.artifacts;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  sum.artifacts.push_back("manifest.json");
  sum.warnings = std::move(warnings);
  ws.log("report: " + std::to_string(sum.artifacts.size()) + " artifacts in " + dir.string());
  return sum;
}

// ---------------------------------------------------------------- standalone commands

/// Compares transcribed original scores with LPF scores taken from the
/// file's own `lpf` column or, given metric cells, from a run.
inline OriginalReport cmd_compare_original(const std::filesystem::path& originals, const std::filesystem::path& out_dir,
                                           const std::vector<MetricCell>* metrics = nullptr,
                                           const ReportContext& ctx = {}) {
  const auto rows = load_originals(originals);
  OriginalReport rep;
  if (metrics) {
    const auto means = dataset_means(*metrics);
    rep = compare_original(rows, [&](const OriginalRow& row) {
      const auto it = means.find({row.technique, row.control, row.dataset, "ce_avg"});
      return it == means.end() ? std::optional<double>() : std::optional<double>(it->second);
    });
  } else {
    rep = compare_original(rows);
  }
  write_table(out_dir, emit_original_comparison(rep, ctx));
  return rep;
}

struct BenchmarkRequest {
  std::filesystem::path benchmark_file;  // TSV: label<TAB>text
  ClassifierSpec classifier;
  std::optional<std::string> positive_label;
  std::size_t batch_size = 32;
};

inline std::string benchmark_record_key(const std::filesystem::path& file, std::size_t index) {
  std::ostringstream os;
  os << "benchmark|" << file.stem().string() << "|" << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

inline BenchmarkMetrics cmd_classifier_benchmark(const BenchmarkRequest& req, ScoringClient& client,
                                                 const std::filesystem::path& out_dir) {
  std::ifstream in(req.benchmark_file, std::ios::binary);
  if (!in) throw LoadError("cannot open benchmark file " + req.benchmark_file.string());
  std::vector<std::string> gold;
  std::vector<TextItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw LoadError(req.benchmark_file.string() + ":" + std::to_string(line_no) + ": expected label<TAB>text");
    }
    const auto label = line.substr(0, tab);
    gold.push_back(req.classifier.task == Attribute::Sentiment ? to_string(parse_sentiment(label))
                                                               : to_string(parse_topic(label)));
    items.push_back({benchmark_record_key(req.benchmark_file, items.size()), line.substr(tab + 1)});
  }
  if (items.empty()) throw LoadError("benchmark file is empty: " + req.benchmark_file.string());

  std::vector<Need> needs;
  for (const auto& it : items) needs.push_back({"classify", req.classifier.id, it.record_key});
  client.preflight(needs);
  std::vector<std::string> pred;
  for (std::size_t lo = 0; lo < items.size(); lo += req.batch_size) {
    const std::vector<TextItem> batch(items.begin() + static_cast<std::ptrdiff_t>(lo),
                                      items.begin() + static_cast<std::ptrdiff_t>(std::min(items.size(), lo + req.batch_size)));
    for (const auto& v : client.classify(req.classifier, batch)) pred.push_back(predicted_label(v));
  }
  std::optional<std::string> positive = req.positive_label;
  if (positive && req.classifier.task == Attribute::Sentiment) positive = to_string(parse_sentiment(*positive));
  const auto m = benchmark_metrics(gold, pred, positive);

  std::ostringstream md;
  std::ostringstream csv;
  md << "## Classifier benchmark\n\n"
     << detail::md_row({"Classifier", "Benchmark", "Acc", "F1", "Prec", "Rec", "n"}) << "|---|---|---:|---:|---:|---:|---:|\n"
     << detail::md_row({req.classifier.id, req.benchmark_file.stem().string(), stats::format_fixed(m.accuracy, 2),
                        stats::format_fixed(m.f1, 2), stats::format_fixed(m.precision, 2),
                        stats::format_fixed(m.recall, 2), std::to_string(m.n)});
  csv << detail::csv_row({"classifier", "benchmark", "accuracy", "f1", "precision", "recall", "n"})
      << detail::csv_row({req.classifier.id, req.benchmark_file.stem().string(), stats::format_fixed(m.accuracy, 4),
                          stats::format_fixed(m.f1, 4), stats::format_fixed(m.precision, 4),
                          stats::format_fixed(m.recall, 4), std::to_string(m.n)});
  write_table(out_dir, {"classifier_benchmark_" + req.classifier.id, md.str(), csv.str()});
  return m;
}

}  // namespace lpf
