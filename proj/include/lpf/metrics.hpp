#pragma once

// Pool-level metrics: Distinct-n, NCE / perplexity / SLOR, control
// effectiveness (per classifier, average, majority vote), keyword
// coverage and multi-attribute CE. All percentages are reals in [0,100].

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpf/corpus.hpp"
#include "lpf/error.hpp"
#include "lpf/lemmas.hpp"
#include "lpf/records.hpp"
#include "lpf/scoring.hpp"
#include "lpf/stats.hpp"
#include "lpf/text.hpp"

namespace lpf {

/// The control level: technique x mode x dataset x attribute x value x seed.
struct PoolKey {
  std::string technique_id;
  PromptMode prompt_mode = PromptMode::None;
  std::string dataset_id;
  Attribute attribute = Attribute::Sentiment;
  std::string control;
  std::int64_t seed = 0;

  static PoolKey of(const ExperimentCell& c) {
    return {c.technique_id, c.prompt_mode, c.dataset_id, c.control.attribute, c.control.value_id(), c.seed};
  }

  auto tie() const {
    return std::tie(technique_id, prompt_mode, dataset_id, attribute, control, seed);
  }
  friend bool operator<(const PoolKey& a, const PoolKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const PoolKey& a, const PoolKey& b) { return a.tie() == b.tie(); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["technique_id"] = technique_id;
    j["prompt_mode"] = to_string(prompt_mode);
    j["dataset_id"] = dataset_id;
    j["attribute"] = to_string(attribute);
    j["control"] = control;
    j["seed"] = seed;
    return j;
  }

  static PoolKey from_json(const nlohmann::json& j) {
    return {j.at("technique_id").get<std::string>(), parse_prompt_mode(j.at("prompt_mode").get<std::string>()),
            j.at("dataset_id").get<std::string>(), parse_attribute(j.at("attribute").get<std::string>()),
            j.at("control").get<std::string>(), j.at("seed").get<std::int64_t>()};
  }
};

struct PoolEntry {
  std::string key;
  std::string post_text;
  bool failed = false;
  std::map<std::string, ClassifierVerdict> verdicts;
  std::map<std::string, SequenceScore> sequence_scores;
};

struct Pool {
  PoolKey key;
  ControlSpec control;
  std::vector<PoolEntry> records;

  std::vector<const PoolEntry*> active() const {
    std::vector<const PoolEntry*> out;
    for (const auto& r : records)
      if (!r.failed) out.push_back(&r);
    return out;
  }
};

struct MetricCell {
  PoolKey key;
  std::string metric;
  double value = 0.0;
  std::map<std::string, double> extra;
  std::size_t n_records = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = key.to_json();
    j["metric"] = metric;
    j["value"] = value;
    j["n"] = n_records;
    if (!extra.empty()) {
      nlohmann::ordered_json e = nlohmann::ordered_json::object();
      for (const auto& [k, v] : extra) e[k] = v;
      j["extra"] = e;
    }
    return j;
  }

  static MetricCell from_json(const nlohmann::json& j) {
    MetricCell c;
    c.key = PoolKey::from_json(j);
    c.metric = j.at("metric").get<std::string>();
    c.value = j.at("value").get<double>();
    c.n_records = j.value("n", std::size_t{0});
    if (j.contains("extra")) c.extra = j["extra"].get<std::map<std::string, double>>();
    return c;
  }
};

// ---------------------------------------------------------------- diversity

/// 100 * unique / total n-grams over word tokens; n-grams never span two
/// texts. Returns 0 and warns when no text has n tokens.
inline double distinct_n(const std::vector<std::string>& texts, int n, std::vector<std::string>* warnings = nullptr) {
  if (n < 1) throw PreconditionError("distinct_n: n must be >= 1");
  std::set<std::vector<std::string>> unique;
  std::size_t total = 0;
  for (const auto& t : texts) {
    const auto toks = text::tokenize(t);
    if (toks.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
      unique.emplace(toks.begin() + static_cast<std::ptrdiff_t>(i),
                     toks.begin() + static_cast<std::ptrdiff_t>(i) + n);
      ++total;
    }
  }
  if (total == 0) {
    if (warnings) warnings->push_back("distinct-" + std::to_string(n) + ": no record has " + std::to_string(n) + " tokens");
    return 0.0;
  }
  return 100.0 * static_cast<double>(unique.size()) / static_cast<double>(total);
}

// ---------------------------------------------------------------- fluency

struct ModelFluency {
  double nce = 0.0;
  double ppl = 0.0;
  double slor = 0.0;
};

struct FluencyScores {
  double nce = 0.0;
  double ppl = 0.0;
  double slor = 0.0;
  std::map<std::string, ModelFluency> per_model;
};

inline ModelFluency fluency(const SequenceScore& s) {
  if (s.length() == 0) throw EmptySequence(s.model_id + ": empty sequence");
  const double len = static_cast<double>(s.length());
  ModelFluency f;
  f.nce = s.log_p() / len;
  f.ppl = std::exp(-f.nce);
  f.slor = (s.log_p() - s.log_p_unigram()) / len;
  return f;
}

/// Cross-model NCE and SLOR are arithmetic means over LMs; perplexity is
/// exp(-NCE) of that mean so the identity holds at every level.
inline FluencyScores fluency(const std::vector<SequenceScore>& scores) {
  if (scores.empty()) throw PreconditionError("fluency: no sequence scores");
  FluencyScores out;
  std::vector<double> nces;
  std::vector<double> slors;
  for (const auto& s : scores) {
    const auto f = fluency(s);
    out.per_model[s.model_id] = f;
    nces.push_back(f.nce);
    slors.push_back(f.slor);
  }
  out.nce = stats::mean(nces);
  out.slor = stats::mean(slors);
  out.ppl = std::exp(-out.nce);
  return out;
}

// ---------------------------------------------------------------- control effectiveness

enum class CeMode { Average, MajorityVote };

/// Label chosen by at least two of the classifiers. With no agreement the
/// label (among those voted) with the highest probability summed across
/// classifiers wins; exact ties fall back to lexicographic order. The
/// target never enters the decision.
inline std::string majority_vote(const std::vector<ClassifierVerdict>& verdicts) {
  if (verdicts.empty()) throw PreconditionError("majority_vote: no verdicts");
  std::map<std::string, int> votes;
  for (const auto& v : verdicts) ++votes[predicted_label(v)];
  for (const auto& [label, count] : votes) {
    if (2 * count > static_cast<int>(verdicts.size())) return label;
  }
  int best_count = 0;
  for (const auto& [label, count] : votes) best_count = std::max(best_count, count);
  std::string best;
  double best_mass = -1.0;
  for (const auto& [label, count] : votes) {
    if (count != best_count) continue;
    stats::KahanSum mass;
    for (const auto& v : verdicts) {
      const auto it = v.label_probs.find(label);
      if (it != v.label_probs.end()) mass.add(it->second);
    }
    if (mass.value() > best_mass) {
      best_mass = mass.value();
      best = label;
    }
  }
  return best;
}

namespace detail {

inline const ClassifierVerdict& verdict_of(const PoolEntry& r, const std::string& classifier) {
  const auto it = r.verdicts.find(classifier);
  if (it == r.verdicts.end()) {
    throw PreconditionError("record " + r.key + " has no verdict from " + classifier);
  }
  return it->second;
}

inline std::vector<ClassifierVerdict> verdicts_of(const PoolEntry& r, const std::vector<std::string>& classifiers) {
  std::vector<ClassifierVerdict> out;
  for (const auto& c : classifiers) out.push_back(verdict_of(r, c));
  return out;
}

inline double pct(std::size_t hits, std::size_t n) {
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

inline std::string target_label(const ControlSpec& c, Attribute task) {
  if (task == Attribute::Sentiment) {
    if (!c.sentiment) throw PreconditionError("pool control has no sentiment target");
    return to_string(*c.sentiment);
  }
  if (!c.topic) throw PreconditionError("pool control has no topic target");
  return to_string(*c.topic);
}

}  // namespace detail

/// Single-attribute CE. `extra` carries the per-classifier accuracies.
inline MetricCell ce_single(const Pool& pool, const std::vector<std::string>& classifiers, CeMode mode) {
  if (classifiers.empty()) throw PreconditionError("ce_single: no classifiers");
  const Attribute task = pool.control.attribute == Attribute::Topic ? Attribute::Topic : Attribute::Sentiment;
  const std::string target = detail::target_label(pool.control, task);
  const auto active = pool.active();
  if (active.empty()) throw PreconditionError("ce_single: pool has no scored records");

  MetricCell cell;
  cell.key = pool.key;
  cell.n_records = active.size();
  cell.metric = mode == CeMode::Average ? "ce_avg" : "ce_mv";
  std::vector<double> accs;
  for (const auto& c : classifiers) {
    std::size_t hits = 0;
    for (const auto* r : active) hits += predicted_label(detail::verdict_of(*r, c)) == target;
    const double acc = detail::pct(hits, active.size());
    cell.extra[c] = acc;
    accs.push_back(acc);
  }
  if (mode == CeMode::Average) {
    cell.value = stats::mean(accs);
  } else {
    std::size_t hits = 0;
    for (const auto* r : active) hits += majority_vote(detail::verdicts_of(*r, classifiers)) == target;
    cell.value = detail::pct(hits, active.size());
  }
  return cell;
}

struct MultiCe {
  double both = 0.0;
  double s = 0.0;
  double t = 0.0;
  double avg = 0.0;
  std::size_t n = 0;
};

inline MultiCe ce_multiple(const Pool& pool, const std::vector<std::string>& sentiment_classifiers,
                           const std::vector<std::string>& topic_classifiers) {
  if (pool.control.attribute != Attribute::Multiple) throw PreconditionError("ce_multiple: pool is not Multiple");
  const auto active = pool.active();
  if (active.empty()) throw PreconditionError("ce_multiple: pool has no scored records");
  const auto s_target = detail::target_label(pool.control, Attribute::Sentiment);
  const auto t_target = detail::target_label(pool.control, Attribute::Topic);
  std::size_t both = 0;
  std::size_t s_hits = 0;
  std::size_t t_hits = 0;
  for (const auto* r : active) {
    const bool s_ok = majority_vote(detail::verdicts_of(*r, sentiment_classifiers)) == s_target;
    const bool t_ok = majority_vote(detail::verdicts_of(*r, topic_classifiers)) == t_target;
    s_hits += s_ok;
    t_hits += t_ok;
    both += s_ok && t_ok;
  }
  MultiCe out;
  out.n = active.size();
  out.both = detail::pct(both, out.n);
  out.s = detail::pct(s_hits, out.n);
  out.t = detail::pct(t_hits, out.n);
  out.avg = (out.s + out.t) / 2.0;
  return out;
}

// ---------------------------------------------------------------- keywords

struct KeywordCoverage {
  double any = 0.0;
  double all = 0.0;
  double cov = 0.0;
  double ext_cov = 0.0;
  double avg = 0.0;
  std::size_t n = 0;
};

struct KeywordRecordScore {
  bool any = false;
  bool all = false;
  double cov = 0.0;
  double ext_cov = 0.0;
};

inline KeywordRecordScore keyword_record(const std::vector<std::string>& keywords, std::string_view post_text,
                                         const LemmaProvider& lemmas) {
  if (keywords.empty()) throw PreconditionError("keyword coverage needs a non-empty keyword set");
  const auto toks = text::tokenize(post_text);
  const std::set<std::string> tokset(toks.begin(), toks.end());
  std::set<std::string> base;
  std::set<std::string> ext;
  for (const auto& t : toks) {
    base.insert(lemmas.base_lemma(t));
    const auto e = lemmas.extended_lemmas(t);
    ext.insert(e.begin(), e.end());
  }
  KeywordRecordScore out;
  std::size_t exact = 0;
  std::size_t base_hits = 0;
  std::size_t ext_hits = 0;
  for (const auto& kw : keywords) {
    const auto k = text::lowercase(kw);
    exact += tokset.contains(k);
    base_hits += base.contains(lemmas.base_lemma(k));
    bool hit = false;
    for (const auto& l : lemmas.extended_lemmas(k)) {
      if (ext.contains(l)) {
        hit = true;
        break;
      }
    }
    ext_hits += hit;
  }
  const double n = static_cast<double>(keywords.size());
  out.any = exact > 0;
  out.all = exact == keywords.size();
  out.cov = static_cast<double>(base_hits) / n;
  out.ext_cov = static_cast<double>(ext_hits) / n;
  return out;
}

inline KeywordCoverage keyword_coverage(const Pool& pool, const LemmaProvider& lemmas) {
  if (pool.control.attribute != Attribute::Keywords) throw PreconditionError("keyword_coverage: pool is not Keywords");
  const auto active = pool.active();
  if (active.empty()) throw PreconditionError("keyword_coverage: pool has no records");
  stats::KahanSum any, all, cov, ext;
  for (const auto* r : active) {
    const auto s = keyword_record(pool.control.keywords, r->post_text, lemmas);
    any.add(s.any ? 1.0 : 0.0);
    all.add(s.all ? 1.0 : 0.0);
    cov.add(s.cov);
    ext.add(s.ext_cov);
  }
  const double n = static_cast<double>(active.size());
  KeywordCoverage out;
  out.n = active.size();
  out.any = 100.0 * any.value() / n;
  out.all = 100.0 * all.value() / n;
  out.cov = 100.0 * cov.value() / n;
  out.ext_cov = 100.0 * ext.value() / n;
  out.avg = (out.any + out.all + out.cov + out.ext_cov) / 4.0;
  return out;
}

// ---------------------------------------------------------------- pool evaluation

struct MetricSuite {
  std::vector<std::string> sentiment_classifiers;
  std::vector<std::string> topic_classifiers;
  std::vector<std::string> fluency_models;
  const LemmaProvider* lemmas = nullptr;
};

struct PoolResult {
  std::vector<MetricCell> cells;
  std::vector<std::string> warnings;
};

/// Every metric the pool's attribute calls for, in a fixed order.
inline PoolResult evaluate_pool(const Pool& pool, const MetricSuite& suite) {
  PoolResult out;
  const auto active = pool.active();
  if (active.empty()) {
    out.warnings.push_back("pool " + pool.key.technique_id + "/" + pool.key.dataset_id + "/" + pool.key.control +
                           "/" + std::to_string(pool.key.seed) + ": every record failed, no metrics");
    return out;
  }
  const auto add = [&](std::string metric, double value, std::map<std::string, double> extra = {}) {
    out.cells.push_back({pool.key, std::move(metric), value, std::move(extra), active.size()});
  };

  std::vector<std::string> texts;
  for (const auto* r : active) texts.push_back(r->post_text);
  for (int n = 1; n <= 3; ++n) add("dist" + std::to_string(n), distinct_n(texts, n, &out.warnings));

  if (!suite.fluency_models.empty()) {
    stats::KahanSum slor, ppl, nce;
    std::map<std::string, stats::KahanSum> slor_by_model;
    std::map<std::string, stats::KahanSum> ppl_by_model;
    for (const auto* r : active) {
      std::vector<SequenceScore> seqs;
      for (const auto& m : suite.fluency_models) {
        const auto it = r->sequence_scores.find(m);
        if (it == r->sequence_scores.end()) throw PreconditionError("record " + r->key + " has no score from " + m);
        seqs.push_back(it->second);
      }
      const auto f = fluency(seqs);
      slor.add(f.slor);
      ppl.add(f.ppl);
      nce.add(f.nce);
      for (const auto& [m, mf] : f.per_model) {
        slor_by_model[m].add(mf.slor);
        ppl_by_model[m].add(mf.ppl);
      }
    }
    const double n = static_cast<double>(active.size());
    std::map<std::string, double> slor_extra, ppl_extra;
    for (const auto& [m, acc] : slor_by_model) slor_extra[m] = acc.value() / n;
    for (const auto& [m, acc] : ppl_by_model) ppl_extra[m] = acc.value() / n;
    add("nce", nce.value() / n);
    add("ppl", ppl.value() / n, ppl_extra);
    add("slor", slor.value() / n, slor_extra);
  }

  switch (pool.control.attribute) {
    case Attribute::Sentiment:
    case Attribute::Topic: {
      const auto& clfs =
          pool.control.attribute == Attribute::Sentiment ? suite.sentiment_classifiers : suite.topic_classifiers;
      const auto avg = ce_single(pool, clfs, CeMode::Average);
      for (const auto& c : clfs) add("ce." + c, avg.extra.at(c));
      add("ce_avg", avg.value, avg.extra);
      const auto mv = ce_single(pool, clfs, CeMode::MajorityVote);
      add("ce_mv", mv.value);
      break;
    }
    case Attribute::Keywords: {
      if (!suite.lemmas) throw PreconditionError("keyword pools need a lemma provider");
      const auto kc = keyword_coverage(pool, *suite.lemmas);
      add("kw_any", kc.any);
      add("kw_all", kc.all);
      add("kw_cov", kc.cov);
      add("kw_extcov", kc.ext_cov);
      add("kw_avg", kc.avg);
      break;
    }
    case Attribute::Multiple: {
      const auto m = ce_multiple(pool, suite.sentiment_classifiers, suite.topic_classifiers);
      add("multi_both", m.both);
      add("multi_s", m.s);
      add("multi_t", m.t);
      add("multi_avg", m.avg);
      break;
    }
  }
  return out;
}

/// Groups generation records and their score bundles into pools. A
/// non-failed record without a bundle is an error.
inline std::vector<Pool> build_pools(const std::vector<GenerationRecord>& gens,
                                     const std::map<std::string, ScoreBundle>& bundles) {
  std::map<PoolKey, Pool> pools;
  for (const auto& g : gens) {
    const auto pk = PoolKey::of(g.cell);
    auto& pool = pools[pk];
    pool.key = pk;
    pool.control = g.cell.control;
    PoolEntry e;
    e.key = g.key();
    e.post_text = g.post_text;
    e.failed = g.failed;
    if (!e.failed) {
      const auto it = bundles.find(e.key);
      if (it == bundles.end()) throw PreconditionError("no score bundle for record " + e.key);
      if (it->second.failed) {
        e.failed = true;
      } else {
        e.verdicts = it->second.verdicts;
        e.sequence_scores = it->second.sequence_scores;
      }
    }
    pool.records.push_back(std::move(e));
  }
  std::vector<Pool> out;
  out.reserve(pools.size());
  for (auto& [k, p] : pools) out.push_back(std::move(p));
  return out;
}

}  // namespace lpf
