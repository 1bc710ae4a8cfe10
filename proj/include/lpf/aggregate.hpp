#pragma once

// Cross-pool combination: dataset-size weighted means over seeds, ranks,
// correlations, classifier agreement, efficiency summaries, comparison
// against originally published scores and classifier benchmarks.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lpf/corpus.hpp"
#include "lpf/error.hpp"
#include "lpf/metrics.hpp"
#include "lpf/records.hpp"
#include "lpf/scoring.hpp"
#include "lpf/stats.hpp"
#include "lpf/text.hpp"

namespace lpf {

enum class Direction { Higher, Lower };

/// Perplexity is the only metric where lower is better.
inline Direction metric_direction(std::string_view metric) {
  return metric == "ppl" ? Direction::Lower : Direction::Higher;
}

/// Non-prompting techniques have a single row; prompting techniques get
/// zero-shot, few-shot and the pooled overall row.
enum class Stratum { Single, ZeroShot, FewShot, Overall };

inline std::string to_string(Stratum s) {
  switch (s) {
    case Stratum::Single: return "all";
    case Stratum::ZeroShot: return "zs";
    case Stratum::FewShot: return "fs";
    case Stratum::Overall: return "overall";
  }
  return "?";
}

inline Stratum parse_stratum(std::string_view s) {
  if (s == "all") return Stratum::Single;
  if (s == "zs") return Stratum::ZeroShot;
  if (s == "fs") return Stratum::FewShot;
  if (s == "overall") return Stratum::Overall;
  throw ConfigError("unknown stratum '" + std::string(s) + "'");
}

enum class StdevAxis { Seeds, Cells };

inline StdevAxis parse_stdev_axis(std::string_view s) {
  if (s == "seeds") return StdevAxis::Seeds;
  if (s == "cells") return StdevAxis::Cells;
  throw ConfigError("--stdev-axis must be 'seeds' or 'cells', got '" + std::string(s) + "'");
}

inline std::string to_string(StdevAxis a) { return a == StdevAxis::Seeds ? "seeds" : "cells"; }

/// Dataset sizes used as weights when no run-specific sizes are given.
inline const std::map<std::string, double>& default_dataset_weights() {
  static const std::map<std::string, double> w = {
      {"pplm_prompts", 35.0}, {"owt_neutral", 5000.0}, {"cloze_2018", 1571.0}, {"sts_test", 625.0}};
  return w;
}

struct AggregateCell {
  std::string technique_id;
  Stratum stratum = Stratum::Single;
  Attribute attribute = Attribute::Sentiment;
  std::string metric;
  double mean = 0.0;
  double stdev = 0.0;
  int rank = 0;
  std::size_t n_points = 0;
  bool single_point = false;  // stdev is 0 because only one point existed

  auto tie() const { return std::tie(attribute, metric, technique_id, stratum); }
};

struct AggregateOptions {
  std::map<std::string, double> weights = default_dataset_weights();
  StdevAxis stdev_axis = StdevAxis::Seeds;
};

namespace detail {

struct StratumPoints {
  std::vector<double> seed_points;  // one per (mode, seed)
  std::vector<double> cell_values;  // every pool-level value
};

/// Steps 1-3 for one (technique, attribute, metric) and a set of modes.
inline StratumPoints stratum_points(const std::vector<const MetricCell*>& cells, const std::set<PromptMode>& modes,
                                    const std::map<std::string, double>& weights) {
  // (mode, seed) -> dataset -> control values
  std::map<std::pair<PromptMode, std::int64_t>, std::map<std::string, std::vector<double>>> grouped;
  StratumPoints out;
  for (const auto* c : cells) {
    if (!modes.contains(c->key.prompt_mode)) continue;
    grouped[{c->key.prompt_mode, c->key.seed}][c->key.dataset_id].push_back(c->value);
    out.cell_values.push_back(c->value);
  }
  for (const auto& [mode_seed, by_dataset] : grouped) {
    std::vector<double> values;
    std::vector<double> ws;
    for (const auto& [dataset, controls] : by_dataset) {
      const auto w = weights.find(dataset);
      if (w == weights.end()) throw PreconditionError("no weight configured for dataset '" + dataset + "'");
      values.push_back(stats::mean(controls));
      ws.push_back(w->second);
    }
    out.seed_points.push_back(stats::weighted_mean(values, ws));
  }
  return out;
}

/// 1-based ranks; best first according to direction; ties by technique id
/// then stratum.
inline void assign_ranks(std::vector<AggregateCell*>& group) {
  if (group.empty()) return;
  const auto dir = metric_direction(group.front()->metric);
  std::sort(group.begin(), group.end(), [dir](const AggregateCell* a, const AggregateCell* b) {
    if (a->mean != b->mean) return dir == Direction::Higher ? a->mean > b->mean : a->mean < b->mean;
    return std::tie(a->technique_id, a->stratum) < std::tie(b->technique_id, b->stratum);
  });
  for (std::size_t i = 0; i < group.size(); ++i) group[i]->rank = static_cast<int>(i) + 1;
}

}  // namespace detail

/// Mean over control values within (dataset, seed), then a dataset-size
/// weighted mean, then mean and stdev over seeds. The overall stratum of a
/// prompting technique pools its zero-shot and few-shot seed points.
inline std::vector<AggregateCell> weighted_aggregate(const std::vector<MetricCell>& cells,
                                                     const AggregateOptions& options = {}) {
  std::map<std::tuple<std::string, Attribute, std::string>, std::vector<const MetricCell*>> by_series;
  for (const auto& c : cells) by_series[{c.key.technique_id, c.key.attribute, c.metric}].push_back(&c);

  std::vector<AggregateCell> out;
  for (const auto& [series, members] : by_series) {
    const auto& [technique, attribute, metric] = series;
    std::set<PromptMode> modes;
    for (const auto* c : members) modes.insert(c->key.prompt_mode);
    if (modes.contains(PromptMode::None) && modes.size() > 1) {
      throw PreconditionError(technique + ": mixes prompted and unprompted cells");
    }
    std::vector<std::pair<Stratum, std::set<PromptMode>>> strata;
    if (modes.contains(PromptMode::None)) {
      strata.push_back({Stratum::Single, {PromptMode::None}});
    } else {
      if (modes.contains(PromptMode::ZeroShot)) strata.push_back({Stratum::ZeroShot, {PromptMode::ZeroShot}});
      if (modes.contains(PromptMode::FewShot)) strata.push_back({Stratum::FewShot, {PromptMode::FewShot}});
      strata.push_back({Stratum::Overall, modes});
    }
    for (const auto& [stratum, stratum_modes] : strata) {
      const auto pts = detail::stratum_points(members, stratum_modes, options.weights);
      AggregateCell a;
      a.technique_id = technique;
      a.stratum = stratum;
      a.attribute = attribute;
      a.metric = metric;
      a.mean = stats::mean(pts.seed_points);
      const auto& spread = options.stdev_axis == StdevAxis::Seeds ? pts.seed_points : pts.cell_values;
      a.stdev = stats::sample_stdev(spread);
      a.n_points = spread.size();
      a.single_point = spread.size() < 2;
      out.push_back(std::move(a));
    }
  }

  std::map<std::pair<Attribute, std::string>, std::vector<AggregateCell*>> groups;
  for (auto& a : out) groups[{a.attribute, a.metric}].push_back(&a);
  for (auto& [k, group] : groups) detail::assign_ranks(group);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.tie() < b.tie(); });
  return out;
}

/// Dataset-level means (over control values, then seeds), keyed by
/// technique, attribute, dataset and metric. Prompted strata are pooled.
inline std::map<std::tuple<std::string, Attribute, std::string, std::string>, double> dataset_means(
    const std::vector<MetricCell>& cells) {
  std::map<std::tuple<std::string, Attribute, std::string, std::string>,
           std::map<std::pair<PromptMode, std::int64_t>, std::vector<double>>>
      grouped;
  for (const auto& c : cells) {
    grouped[{c.key.technique_id, c.key.attribute, c.key.dataset_id, c.metric}][{c.key.prompt_mode, c.key.seed}]
        .push_back(c.value);
  }
  std::map<std::tuple<std::string, Attribute, std::string, std::string>, double> out;
  for (const auto& [k, by_seed] : grouped) {
    std::vector<double> seed_means;
    for (const auto& [s, vals] : by_seed) seed_means.push_back(stats::mean(vals));
    out[k] = stats::mean(seed_means);
  }
  return out;
}

// ---------------------------------------------------------------- correlation

struct CorrelationReport {
  std::string series_a;
  std::string series_b;
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  std::size_t n = 0;
};

inline CorrelationReport correlate(std::string name_a, std::span<const double> a, std::string name_b,
                                   std::span<const double> b) {
  if (a.size() != b.size()) throw PreconditionError("correlate: series lengths differ");
  if (a.size() < 3) throw PreconditionError("correlate: need at least 3 points, got " + std::to_string(a.size()));
  return {std::move(name_a), std::move(name_b), stats::pearson(a, b), stats::spearman(a, b), a.size()};
}

/// Aligns two keyed series; the key sets must match exactly.
inline CorrelationReport correlate(std::string name_a, const std::map<std::string, double>& a, std::string name_b,
                                   const std::map<std::string, double>& b) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [k, v] : a) {
    const auto it = b.find(k);
    if (it == b.end()) throw PreconditionError("correlate: key '" + k + "' missing from " + name_b);
    xs.push_back(v);
    ys.push_back(it->second);
  }
  if (a.size() != b.size()) throw PreconditionError("correlate: " + name_b + " has keys absent from " + name_a);
  return correlate(std::move(name_a), xs, std::move(name_b), ys);
}

// ---------------------------------------------------------------- agreement

struct AgreementMatrix {
  std::vector<std::string> classifiers;
  std::vector<std::vector<double>> values;

  double at(std::size_t i, std::size_t j) const { return values.at(i).at(j); }
};

/// Phi coefficient between two correctness streams. A constant stream has
/// no variance; two identical streams agree fully (1), otherwise 0.
inline double phi(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size() || a.empty()) throw PreconditionError("phi: streams must be non-empty and equal length");
  const auto constant = [](const std::vector<bool>& v) {
    return std::all_of(v.begin(), v.end(), [&](bool x) { return x == v.front(); });
  };
  if (constant(a) || constant(b)) return a == b ? 1.0 : 0.0;
  std::vector<double> xa(a.begin(), a.end());
  std::vector<double> xb(b.begin(), b.end());
  return stats::pearson(xa, xb);
}

/// Input: classifier -> record key -> prediction was correct.
inline AgreementMatrix classifier_agreement(const std::map<std::string, std::map<std::string, bool>>& correct) {
  if (correct.empty()) throw PreconditionError("classifier_agreement: no classifiers");
  AgreementMatrix m;
  std::vector<std::vector<bool>> streams;
  const auto& reference = correct.begin()->second;
  for (const auto& [clf, by_record] : correct) {
    if (by_record.size() != reference.size() ||
        !std::equal(by_record.begin(), by_record.end(), reference.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; })) {
      throw PreconditionError("classifier_agreement: " + clf + " scored a different record set");
    }
    m.classifiers.push_back(clf);
    std::vector<bool> s;
    for (const auto& [k, ok] : by_record) s.push_back(ok);
    streams.push_back(std::move(s));
  }
  const std::size_t k = streams.size();
  m.values.assign(k, std::vector<double>(k, 1.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) m.values[i][j] = m.values[j][i] = phi(streams[i], streams[j]);
  return m;
}

/// Correctness indicators of each classifier over every scored record of
/// the given single-attribute pools.
inline std::map<std::string, std::map<std::string, bool>> correctness_indicators(
    const std::vector<Pool>& pools, const std::vector<std::string>& classifiers) {
  std::map<std::string, std::map<std::string, bool>> out;
  for (const auto& pool : pools) {
    const Attribute task = pool.control.attribute;
    if (task != Attribute::Sentiment && task != Attribute::Topic) continue;
    const auto target = detail::target_label(pool.control, task);
    for (const auto* r : pool.active()) {
      for (const auto& c : classifiers) out[c][r->key] = predicted_label(detail::verdict_of(*r, c)) == target;
    }
  }
  return out;
}

// ---------------------------------------------------------------- efficiency

struct EfficiencySummary {
  std::string technique_id;
  Stratum stratum = Stratum::Single;
  Attribute attribute = Attribute::Sentiment;
  bool available = false;
  double mean_seconds = 0.0;
  double stdev_seconds = 0.0;  // across seed means
  std::size_t n_samples = 0;
  std::optional<double> memory_gb;
  std::vector<std::pair<std::string, double>> memory_components_gb;
};

/// Per (technique, prompt mode, attribute) wall time per sample, averaged
/// over all datasets and seeds. Combinations without timing data (the
/// attribute is unsupported or nothing was generated) are unavailable.
inline std::vector<EfficiencySummary> summarize_efficiency(
    const std::vector<GenerationRecord>& records, const std::vector<Capability>& techniques,
    const std::vector<Attribute>& attributes, const std::map<std::string, ModelManifest>& memory_by_technique) {
  std::map<std::tuple<std::string, PromptMode, Attribute>, std::map<std::int64_t, std::vector<double>>> timings;
  for (const auto& r : records) {
    if (r.failed) continue;
    timings[{r.cell.technique_id, r.cell.prompt_mode, r.cell.control.attribute}][r.cell.seed].push_back(
        r.wall_ms / 1000.0);
  }
  std::vector<EfficiencySummary> out;
  for (const auto& tech : techniques) {
    std::vector<std::pair<Stratum, PromptMode>> strata;
    if (tech.prompting) {
      strata = {{Stratum::ZeroShot, PromptMode::ZeroShot}, {Stratum::FewShot, PromptMode::FewShot}};
    } else {
      strata = {{Stratum::Single, PromptMode::None}};
    }
    for (const auto& [stratum, mode] : strata) {
      for (const auto attribute : attributes) {
        EfficiencySummary s;
        s.technique_id = tech.technique_id;
        s.stratum = stratum;
        s.attribute = attribute;
        if (const auto m = memory_by_technique.find(tech.technique_id); m != memory_by_technique.end()) {
          m->second.validate();
          s.memory_gb = m->second.total_gb();
          for (const auto& [name, bytes] : m->second.components) {
            s.memory_components_gb.emplace_back(name, static_cast<double>(bytes) / 1e9);
          }
        }
        const auto it = timings.find({tech.technique_id, mode, attribute});
        if (tech.supported.contains(attribute) && it != timings.end()) {
          std::vector<double> all;
          std::vector<double> seed_means;
          for (const auto& [seed, secs] : it->second) {
            all.insert(all.end(), secs.begin(), secs.end());
            seed_means.push_back(stats::mean(secs));
          }
          s.available = true;
          s.n_samples = all.size();
          s.mean_seconds = stats::mean(all);
          s.stdev_seconds = stats::sample_stdev(seed_means);
        }
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- original results

struct OriginalRow {
  Attribute control = Attribute::Sentiment;
  std::string dataset;
  std::string technique;
  std::optional<double> lpf;  // transcribed LPF score, if the file has one
  double original = 0.0;
};

struct OriginalComparison {
  Attribute control = Attribute::Sentiment;
  std::string dataset;
  std::string technique;
  double lpf_score = 0.0;
  double original_score = 0.0;
  double delta = 0.0;
};

struct OriginalReport {
  std::vector<OriginalComparison> rows;
  CorrelationReport correlation;
};

/// CSV with header `control,dataset,technique,lpf,original`; `lpf` may be
/// empty when the score comes from a run.
inline std::vector<OriginalRow> load_originals(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open originals file " + path.string());
  std::string line;
  std::map<std::string, std::size_t> col;
  std::size_t line_no = 0;
  std::vector<OriginalRow> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line[0] == '#') continue;
    const auto cells = text::split(line, ',');
    if (col.empty()) {
      for (std::size_t i = 0; i < cells.size(); ++i) col[text::trim(cells[i])] = i;
      for (const char* need : {"control", "dataset", "technique", "original"}) {
        if (!col.contains(need)) throw LoadError(path.string() + ": missing column '" + need + "'");
      }
      continue;
    }
    const auto get = [&](const std::string& name) -> std::string {
      const auto it = col.find(name);
      if (it == col.end() || it->second >= cells.size()) return {};
      return text::trim(cells[it->second]);
    };
    try {
      OriginalRow r;
      r.control = parse_attribute(get("control"));
      r.dataset = get("dataset");
      r.technique = get("technique");
      if (const auto lpf = get("lpf"); !lpf.empty()) r.lpf = std::stod(lpf);
      r.original = std::stod(get("original"));
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw LoadError(path.string() + ": no rows");
  return out;
}

/// `lookup` supplies LPF scores for rows without one; it returns nullopt
/// when the run has no matching aggregate.
template <typename Lookup>
OriginalReport compare_original(const std::vector<OriginalRow>& originals, Lookup&& lookup) {
  OriginalReport rep;
  std::vector<double> lpf;
  std::vector<double> orig;
  std::vector<std::string> gaps;
  for (const auto& row : originals) {
    std::optional<double> score = lookup(row);
    if (!score) score = row.lpf;
    if (!score) {
      gaps.push_back(row.technique + "/" + row.dataset + "/" + to_string(row.control));
      continue;
    }
    rep.rows.push_back({row.control, row.dataset, row.technique, *score, row.original, *score - row.original});
    lpf.push_back(*score);
    orig.push_back(row.original);
  }
  if (!gaps.empty()) {
    std::string msg = "no LPF score for:";
    for (const auto& g : gaps) msg += " " + g;
    throw PreconditionError(msg);
  }
  rep.correlation = correlate("lpf", lpf, "original", orig);
  return rep;
}

inline OriginalReport compare_original(const std::vector<OriginalRow>& originals) {
  return compare_original(originals, [](const OriginalRow&) { return std::optional<double>(); });
}

// ---------------------------------------------------------------- classifier benchmark

struct BenchmarkMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t n = 0;
};

/// Percentages. With a positive label the binary scores of that class are
/// reported; otherwise per-class scores are averaged weighted by support.
inline BenchmarkMetrics benchmark_metrics(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                                          std::optional<std::string> positive = std::nullopt) {
  if (gold.size() != pred.size() || gold.empty()) {
    throw PreconditionError("benchmark_metrics: gold and predictions must be non-empty and aligned");
  }
  std::set<std::string> labels(gold.begin(), gold.end());
  labels.insert(pred.begin(), pred.end());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];

  struct PRF {
    double p = 0.0, r = 0.0, f = 0.0;
  };
  const auto class_scores = [&](const std::string& label) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == label;
      const bool p = pred[i] == label;
      tp += g && p;
      fp += !g && p;
      fn += g && !p;
    }
    PRF s;
    s.p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    s.r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    s.f = s.p + s.r == 0.0 ? 0.0 : 2.0 * s.p * s.r / (s.p + s.r);
    return s;
  };

  BenchmarkMetrics m;
  m.n = gold.size();
  m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(gold.size());
  if (positive) {
    const auto s = class_scores(*positive);
    m.precision = 100.0 * s.p;
    m.recall = 100.0 * s.r;
    m.f1 = 100.0 * s.f;
    return m;
  }
  stats::KahanSum p, r, f;
  for (const auto& label : labels) {
    const double support = static_cast<double>(std::count(gold.begin(), gold.end(), label));
    const auto s = class_scores(label);
    p.add(support * s.p);
    r.add(support * s.r);
    f.add(support * s.f);
  }
  const double n = static_cast<double>(gold.size());
  m.precision = 100.0 * p.value() / n;
  m.recall = 100.0 * r.value() / n;
  m.f1 = 100.0 * f.value() / n;
  return m;
}

}  // namespace lpf
