#pragma once

// Result surfaces: Markdown and CSV tables, chart series (JSON and a
// minimal SVG), aggregate CSV export and the run manifest. Output bytes
// depend only on the inputs; nothing here reads clocks or the environment.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpf/aggregate.hpp"
#include "lpf/corpus.hpp"
#include "lpf/error.hpp"
#include "lpf/stats.hpp"

namespace lpf {

struct Column {
  std::string header;
  std::string metric;
  int precision = 2;
  int stdev_precision = 1;
  bool bold_best = true;
  bool show_rank = false;
};

struct TableSpec {
  std::string id;
  std::string title;
  Attribute attribute = Attribute::Sentiment;
  std::vector<Column> columns;
  /// Metrics whose aggregates this table is the home of.
  std::set<std::string> owns;

  void validate() const {
    if (columns.empty()) throw EmissionError(id + ": table has no columns");
    for (const auto& c : columns) {
      if (c.precision < 0 || c.stdev_precision < 0) throw EmissionError(id + ": negative precision");
    }
  }
};

struct ReportContext {
  std::vector<std::string> technique_order;  // row order; unknown ids sort after, by id
  std::map<std::string, std::string> display_names;

  std::string display(const std::string& id) const {
    const auto it = display_names.find(id);
    return it == display_names.end() ? id : it->second;
  }
  std::size_t position(const std::string& id) const {
    const auto it = std::find(technique_order.begin(), technique_order.end(), id);
    return static_cast<std::size_t>(it - technique_order.begin());
  }
};

struct RenderedTable {
  std::string id;
  std::string markdown;
  std::string csv;
};

inline std::string stratum_label(Stratum s) {
  switch (s) {
    case Stratum::Single: return "";
    case Stratum::ZeroShot: return "ZS";
    case Stratum::FewShot: return "FS";
    case Stratum::Overall: return "Ov";
  }
  return "";
}

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += csv_field(cells[i]);
  }
  return out + "\n";
}

inline std::string md_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + c + " |";
  return out + "\n";
}

using RowKey = std::pair<std::string, Stratum>;

inline std::vector<RowKey> ordered_rows(std::set<RowKey> rows, const ReportContext& ctx) {
  std::vector<RowKey> out(rows.begin(), rows.end());
  std::sort(out.begin(), out.end(), [&](const RowKey& a, const RowKey& b) {
    const auto pa = ctx.position(a.first);
    const auto pb = ctx.position(b.first);
    if (pa != pb) return pa < pb;
    return a < b;
  });
  return out;
}

}  // namespace detail

/// Renders one table. Rows are the (technique, stratum) pairs that have
/// any of the table's metrics; a row lacking one of them is a gap and the
/// whole emission fails with the list of gaps.
inline RenderedTable emit_table(const TableSpec& spec, const std::vector<AggregateCell>& aggregates,
                                const ReportContext& ctx) {
  spec.validate();
  std::map<std::pair<detail::RowKey, std::string>, const AggregateCell*> index;
  std::set<detail::RowKey> row_set;
  std::set<std::string> metrics;
  for (const auto& c : spec.columns) metrics.insert(c.metric);
  for (const auto& a : aggregates) {
    if (a.attribute != spec.attribute || !metrics.contains(a.metric)) continue;
    index[{{a.technique_id, a.stratum}, a.metric}] = &a;
    row_set.insert({a.technique_id, a.stratum});
  }
  if (row_set.empty()) throw EmissionError(spec.id + ": no aggregates for this table");
  const auto rows = detail::ordered_rows(row_set, ctx);

  std::vector<std::string> gaps;
  for (const auto& row : rows)
    for (const auto& col : spec.columns)
      if (!index.contains({row, col.metric}))
        gaps.push_back(row.first + "/" + to_string(row.second) + "/" + col.metric);
  if (!gaps.empty()) {
    std::string msg = spec.id + ": missing aggregates:";
    for (const auto& g : gaps) msg += " " + g;
    throw EmissionError(msg);
  }

  // Best value per column, compared at full precision.
  std::map<std::string, double> best;
  for (const auto& col : spec.columns) {
    const auto dir = metric_direction(col.metric);
    for (const auto& row : rows) {
      const double v = index.at({row, col.metric})->mean;
      auto [it, inserted] = best.emplace(col.metric, v);
      if (!inserted && (dir == Direction::Higher ? v > it->second : v < it->second)) it->second = v;
    }
  }

  std::ostringstream md;
  std::ostringstream csv;
  md << "## " << spec.title << "\n\n";
  std::vector<std::string> header{"Technique", "Mode"};
  std::vector<std::string> csv_header{"technique", "stratum"};
  for (const auto& col : spec.columns) {
    header.push_back(col.header + (metric_direction(col.metric) == Direction::Higher ? " ↑" : " ↓"));
    csv_header.push_back(col.metric + "_mean");
    csv_header.push_back(col.metric + "_stdev");
    if (col.show_rank) csv_header.push_back(col.metric + "_rank");
  }
  md << detail::md_row(header);
  md << "|";
  for (std::size_t i = 0; i < header.size(); ++i) md << (i < 2 ? "---|" : "---:|");
  md << "\n";
  csv << detail::csv_row(csv_header);

  for (const auto& row : rows) {
    std::vector<std::string> cells{ctx.display(row.first), stratum_label(row.second)};
    std::vector<std::string> csv_cells{row.first, to_string(row.second)};
    for (const auto& col : spec.columns) {
      const auto* a = index.at({row, col.metric});
      std::string value = stats::format_fixed(a->mean, col.precision);
      if (col.bold_best && a->mean == best.at(col.metric)) value = "**" + value + "**";
      value += " (" + stats::format_fixed(a->stdev, col.stdev_precision) + ")";
      if (col.show_rank) value += " [" + std::to_string(a->rank) + "]";
      cells.push_back(value);
      csv_cells.push_back(stats::format_fixed(a->mean, col.precision));
      csv_cells.push_back(stats::format_fixed(a->stdev, col.stdev_precision));
      if (col.show_rank) csv_cells.push_back(std::to_string(a->rank));
    }
    md << detail::md_row(cells);
    csv << detail::csv_row(csv_cells);
  }
  return {spec.id, md.str(), csv.str()};
}

/// The standard layouts: one results table per attribute, plus
/// average-vs-majority and perplexity-vs-SLOR comparisons.
inline std::vector<TableSpec> standard_tables(const std::vector<std::string>& sentiment_classifiers,
                                              const std::vector<std::string>& topic_classifiers,
                                              const std::set<Attribute>& attributes, bool fluency = true) {
  const auto diversity = std::vector<Column>{{"dist1", "dist1"}, {"dist2", "dist2"}, {"dist3", "dist3"}};
  std::vector<TableSpec> out;
  for (const auto attribute : attributes) {
    const std::string a = to_string(attribute);
    TableSpec results{a + "_results", "Results: " + a + " control", attribute, diversity, {"dist1", "dist2", "dist3"}};
    if (fluency) results.columns.push_back({"SLOR", "slor"});
    std::vector<std::string> ce;
    switch (attribute) {
      case Attribute::Sentiment:
      case Attribute::Topic:
        for (const auto& c : attribute == Attribute::Sentiment ? sentiment_classifiers : topic_classifiers)
          ce.push_back("ce." + c);
        ce.push_back("ce_avg");
        break;
      case Attribute::Keywords: ce = {"kw_any", "kw_all", "kw_extcov", "kw_cov", "kw_avg"}; break;
      case Attribute::Multiple: ce = {"multi_both", "multi_s", "multi_t", "multi_avg"}; break;
    }
    for (const auto& m : ce) {
      std::string header = m;
      if (m.starts_with("ce.")) header = m.substr(3);
      results.columns.push_back({header, m});
      results.owns.insert(m);
    }
    out.push_back(std::move(results));

    if (attribute == Attribute::Sentiment || attribute == Attribute::Topic) {
      TableSpec mv{a + "_avg_vs_mv", "Average vs majority-vote CE: " + a + " control", attribute, {}, {"ce_mv"}};
      mv.columns.push_back({"Average", "ce_avg", 2, 1, true, true});
      mv.columns.push_back({"Majority Vote", "ce_mv", 2, 1, true, true});
      out.push_back(std::move(mv));
    }
    if (!fluency) continue;
    TableSpec fl{a + "_ppl_vs_slor", "Perplexity vs SLOR: " + a + " control", attribute, {}, {"ppl", "slor", "nce"}};
    fl.columns.push_back({"Perplexity", "ppl", 2, 1, true, true});
    fl.columns.push_back({"SLOR", "slor", 2, 1, true, true});
    fl.columns.push_back({"NCE", "nce", 3, 2, false, false});
    out.push_back(std::move(fl));
  }
  return out;
}

/// Every aggregate cell must be owned by exactly one table.
inline void check_coverage(const std::vector<TableSpec>& specs, const std::vector<AggregateCell>& aggregates) {
  std::vector<std::string> problems;
  std::set<std::pair<Attribute, std::string>> reported;
  for (const auto& a : aggregates) {
    if (!reported.insert({a.attribute, a.metric}).second) continue;
    std::size_t owners = 0;
    for (const auto& s : specs) owners += s.attribute == a.attribute && s.owns.contains(a.metric);
    if (owners != 1) {
      problems.push_back(to_string(a.attribute) + "/" + a.metric + " owned by " + std::to_string(owners) +
                         " tables");
    }
  }
  if (!problems.empty()) {
    std::string msg = "table coverage check failed:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw EmissionError(msg);
  }
}

/// Aggregate export: technique, stratum, attribute, metric, mean, stdev, rank, n.
inline std::string aggregates_csv(const std::vector<AggregateCell>& aggregates) {
  std::string out = detail::csv_row({"technique", "stratum", "attribute", "metric", "mean", "stdev", "rank", "n"});
  for (const auto& a : aggregates) {
    out += detail::csv_row({a.technique_id, to_string(a.stratum), to_string(a.attribute), a.metric,
                            stats::format_fixed(a.mean, 6), stats::format_fixed(a.stdev, 6), std::to_string(a.rank),
                            std::to_string(a.n_points)});
  }
  return out;
}

inline RenderedTable emit_correlations(const std::vector<CorrelationReport>& reports) {
  std::ostringstream md;
  std::ostringstream csv;
  md << "## Correlations\n\n";
  md << detail::md_row({"Series A", "Series B", "Pearson r", "Spearman rho", "n"});
  md << "|---|---|---:|---:|---:|\n";
  csv << detail::csv_row({"series_a", "series_b", "pearson_r", "spearman_rho", "n"});
  for (const auto& r : reports) {
    const std::vector<std::string> cells{r.series_a, r.series_b, stats::format_fixed(r.pearson_r, 2),
                                         stats::format_fixed(r.spearman_rho, 2), std::to_string(r.n)};
    md << detail::md_row(cells);
    csv << detail::csv_row({r.series_a, r.series_b, stats::format_fixed(r.pearson_r, 6),
                            stats::format_fixed(r.spearman_rho, 6), std::to_string(r.n)});
  }
  return {"correlations", md.str(), csv.str()};
}

inline RenderedTable emit_agreement(const std::string& id, const std::string& title, const AgreementMatrix& m) {
  std::ostringstream md;
  std::ostringstream csv;
  md << "## " << title << "\n\n";
  std::vector<std::string> header{""};
  header.insert(header.end(), m.classifiers.begin(), m.classifiers.end());
  md << detail::md_row(header) << "|---|";
  for (std::size_t i = 0; i < m.classifiers.size(); ++i) md << "---:|";
  md << "\n";
  csv << detail::csv_row(header);
  for (std::size_t i = 0; i < m.classifiers.size(); ++i) {
    std::vector<std::string> md_cells{m.classifiers[i]};
    std::vector<std::string> csv_cells{m.classifiers[i]};
    for (std::size_t j = 0; j < m.classifiers.size(); ++j) {
      md_cells.push_back(stats::format_fixed(m.at(i, j), 2));
      csv_cells.push_back(stats::format_fixed(m.at(i, j), 6));
    }
    md << detail::md_row(md_cells);
    csv << detail::csv_row(csv_cells);
  }
  return {id, md.str(), csv.str()};
}

/// Seconds per sample by attribute; unavailable cells print "--" and the
/// fastest available value per column is bold.
inline RenderedTable emit_efficiency_time(const std::vector<EfficiencySummary>& rows, const ReportContext& ctx,
                                          const std::vector<Attribute>& attributes) {
  std::map<detail::RowKey, std::map<Attribute, const EfficiencySummary*>> grid;
  std::map<Attribute, double> best;
  for (const auto& r : rows) {
    grid[{r.technique_id, r.stratum}][r.attribute] = &r;
    if (!r.available) continue;
    auto [it, inserted] = best.emplace(r.attribute, r.mean_seconds);
    if (!inserted) it->second = std::min(it->second, r.mean_seconds);
  }
  std::set<detail::RowKey> keys;
  for (const auto& [k, v] : grid) keys.insert(k);
  const auto ordered = detail::ordered_rows(keys, ctx);

  std::ostringstream md;
  std::ostringstream csv;
  md << "## Inference time (seconds per sample)\n\n";
  std::vector<std::string> header{"Technique", "Mode"};
  std::vector<std::string> csv_header{"technique", "stratum"};
  for (auto a : attributes) {
    header.push_back(to_string(a) + " ↓");
    csv_header.push_back(to_string(a) + "_mean");
    csv_header.push_back(to_string(a) + "_stdev");
  }
  md << detail::md_row(header) << "|---|---|";
  for (std::size_t i = 0; i < attributes.size(); ++i) md << "---:|";
  md << "\n";
  csv << detail::csv_row(csv_header);
  for (const auto& key : ordered) {
    std::vector<std::string> cells{ctx.display(key.first), stratum_label(key.second)};
    std::vector<std::string> csv_cells{key.first, to_string(key.second)};
    for (auto a : attributes) {
      const auto it = grid[key].find(a);
      if (it == grid[key].end() || !it->second->available) {
        cells.push_back("--");
        csv_cells.push_back("--");
        csv_cells.push_back("--");
        continue;
      }
      const auto* s = it->second;
      std::string v = stats::format_fixed(s->mean_seconds, 2);
      if (s->mean_seconds == best.at(a)) v = "**" + v + "**";
      cells.push_back(v + " ±" + stats::format_fixed(s->stdev_seconds, 2));
      csv_cells.push_back(stats::format_fixed(s->mean_seconds, 4));
      csv_cells.push_back(stats::format_fixed(s->stdev_seconds, 4));
    }
    md << detail::md_row(cells);
    csv << detail::csv_row(csv_cells);
  }
  return {"efficiency_time", md.str(), csv.str()};
}

inline RenderedTable emit_efficiency_memory(const std::map<std::string, ModelManifest>& memory,
                                            const ReportContext& ctx) {
  std::vector<std::string> ids;
  for (const auto& [id, m] : memory) ids.push_back(id);
  std::sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) {
    const auto pa = ctx.position(a);
    const auto pb = ctx.position(b);
    return pa != pb ? pa < pb : a < b;
  });
  std::ostringstream md;
  std::ostringstream csv;
  md << "## Memory (GB)\n\n" << detail::md_row({"Technique", "Details", "Total"}) << "|---|---|---:|\n";
  csv << detail::csv_row({"technique", "details", "total_gb"});
  for (const auto& id : ids) {
    const auto& m = memory.at(id);
    m.validate();
    std::string details;
    for (const auto& [name, bytes] : m.components) {
      if (!details.empty()) details += " + ";
      details += name + " (~" + stats::format_fixed(static_cast<double>(bytes) / 1e9, 1) + ")";
    }
    md << detail::md_row({ctx.display(id), details, "~" + stats::format_fixed(m.total_gb(), 1)});
    csv << detail::csv_row({id, details, stats::format_fixed(m.total_gb(), 3)});
  }
  return {"efficiency_memory", md.str(), csv.str()};
}

inline RenderedTable emit_original_comparison(const OriginalReport& rep, const ReportContext& ctx) {
  std::ostringstream md;
  std::ostringstream csv;
  md << "## Comparison with original results\n\n"
     << detail::md_row({"Control", "Dataset", "Technique", "LPF", "Original", "Delta"}) << "|---|---|---|---:|---:|---:|\n";
  csv << detail::csv_row({"control", "dataset", "technique", "lpf", "original", "delta"});
  for (const auto& r : rep.rows) {
    const std::vector<std::string> cells{to_string(r.control), r.dataset, ctx.display(r.technique),
                                         stats::format_fixed(r.lpf_score, 2), stats::format_fixed(r.original_score, 2),
                                         stats::format_fixed(r.delta, 2)};
    md << detail::md_row(cells);
    csv << detail::csv_row({to_string(r.control), r.dataset, r.technique, stats::format_fixed(r.lpf_score, 2),
                            stats::format_fixed(r.original_score, 2), stats::format_fixed(r.delta, 2)});
  }
  md << "\nPearson r = " << stats::format_fixed(rep.correlation.pearson_r, 2)
     << ", Spearman rho = " << stats::format_fixed(rep.correlation.spearman_rho, 2) << ", n = " << rep.correlation.n
     << "\n";
  return {"compare_original", md.str(), csv.str()};
}

// ---------------------------------------------------------------- charts

struct ChartSeries {
  std::string dataset;
  std::string control;
  std::string technique_id;
  Stratum stratum = Stratum::Single;
  double mean = 0.0;
  double stdev = 0.0;
  std::size_t n_seeds = 0;
};

struct ChartData {
  Attribute attribute = Attribute::Sentiment;
  std::string metric;
  std::vector<ChartSeries> series;
  std::vector<std::string> gaps;
};

/// Headline CE metric plotted per attribute.
inline std::string chart_metric(Attribute a) {
  switch (a) {
    case Attribute::Sentiment:
    case Attribute::Topic: return "ce_avg";
    case Attribute::Keywords: return "kw_avg";
    case Attribute::Multiple: return "multi_both";
  }
  return "";
}

/// One series per (dataset, control value, technique row), mean and stdev
/// over seeds. A technique present for the attribute but absent for a
/// (dataset, control value) yields a recorded gap instead of a series.
inline ChartData emit_chart_data(const std::vector<MetricCell>& cells, Attribute attribute,
                                 const std::vector<std::string>& datasets, std::vector<std::string> controls = {}) {
  ChartData out;
  out.attribute = attribute;
  out.metric = chart_metric(attribute);
  using RowKey = detail::RowKey;
  std::map<std::tuple<std::string, std::string, RowKey>, std::map<std::int64_t, double>> points;
  std::set<RowKey> rows;
  for (const auto& c : cells) {
    if (c.key.attribute != attribute || c.metric != out.metric) continue;
    const Stratum s = c.key.prompt_mode == PromptMode::ZeroShot  ? Stratum::ZeroShot
                      : c.key.prompt_mode == PromptMode::FewShot ? Stratum::FewShot
                                                                 : Stratum::Single;
    const RowKey row{c.key.technique_id, s};
    rows.insert(row);
    points[{c.key.dataset_id, c.key.control, row}][c.key.seed] = c.value;
  }
  if (controls.empty())
    for (const auto& v : control_values(attribute)) controls.push_back(v.value_id());
  for (const auto& ds : datasets)
    for (const auto& control : controls)
      for (const auto& row : rows) {
        const auto it = points.find({ds, control, row});
        if (it == points.end()) {
          out.gaps.push_back(row.first + "/" + to_string(row.second) + " has no " + out.metric + " for " + ds + "/" +
                             control);
          continue;
        }
        std::vector<double> vs;
        for (const auto& [seed, v] : it->second) vs.push_back(v);
        out.series.push_back(
            {ds, control, row.first, row.second, stats::mean(vs), stats::sample_stdev(vs), vs.size()});
      }
  return out;
}

inline nlohmann::ordered_json chart_json(const ChartData& d) {
  nlohmann::ordered_json j;
  j["attribute"] = to_string(d.attribute);
  j["metric"] = d.metric;
  j["series"] = nlohmann::ordered_json::array();
  for (const auto& s : d.series) {
    nlohmann::ordered_json row;
    row["dataset"] = s.dataset;
    row["control"] = s.control;
    row["technique"] = s.technique_id;
    row["stratum"] = to_string(s.stratum);
    row["mean"] = s.mean;
    row["stdev"] = s.stdev;
    row["n_seeds"] = s.n_seeds;
    j["series"].push_back(std::move(row));
  }
  j["gaps"] = d.gaps;
  return j;
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Grouped bar chart with error bars, one group per (dataset, control).
inline std::string chart_svg(const ChartData& d, const ReportContext& ctx) {
  std::vector<std::pair<std::string, std::string>> groups;
  std::vector<detail::RowKey> bars;
  for (const auto& s : d.series) {
    const std::pair<std::string, std::string> g{s.dataset, s.control};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    const detail::RowKey b{s.technique_id, s.stratum};
    if (std::find(bars.begin(), bars.end(), b) == bars.end()) bars.push_back(b);
  }
  const double bar_w = 10.0;
  const double group_gap = 20.0;
  const double plot_h = 200.0;
  const double left = 40.0;
  const double top = 20.0;
  const double group_w = bar_w * static_cast<double>(std::max<std::size_t>(bars.size(), 1)) + group_gap;
  const double width = left + group_w * static_cast<double>(groups.size()) + 20.0;
  const double height = top + plot_h + 90.0;
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
                                  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#1f77b4", "#2ca02c"};
  const auto y = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 100.0) / 100.0); };
  const auto num = [](double v) { return stats::format_fixed(v, 2); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
  os << "<text x=\"" << num(left) << "\" y=\"12\">" << to_string(d.attribute) << " " << d.metric << "</text>\n";
  os << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
     << num(top + plot_h) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 100; t += 25) {
    os << "<text x=\"2\" y=\"" << num(y(t) + 3) << "\">" << t << "</text>\n";
  }
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double gx = left + 5.0 + group_w * static_cast<double>(gi);
    for (const auto& s : d.series) {
      if (s.dataset != groups[gi].first || s.control != groups[gi].second) continue;
      const auto bi = static_cast<std::size_t>(
          std::find(bars.begin(), bars.end(), detail::RowKey{s.technique_id, s.stratum}) - bars.begin());
      const double x = gx + bar_w * static_cast<double>(bi);
      os << "<rect x=\"" << num(x) << "\" y=\"" << num(y(s.mean)) << "\" width=\"" << num(bar_w - 1) << "\" height=\""
         << num(top + plot_h - y(s.mean)) << "\" fill=\"" << palette[bi % 12] << "\"/>\n";
      const double cx = x + (bar_w - 1) / 2.0;
      os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y(s.mean + s.stdev)) << "\" x2=\"" << num(cx)
         << "\" y2=\"" << num(y(s.mean - s.stdev)) << "\" stroke=\"black\"/>\n";
    }
    os << "<text x=\"" << num(gx) << "\" y=\"" << num(top + plot_h + 12) << "\">" << detail::xml_escape(groups[gi].first) << "</text>\n";
    os << "<text x=\"" << num(gx) << "\" y=\"" << num(top + plot_h + 22) << "\">" << detail::xml_escape(groups[gi].second)
       << "</text>\n";
  }
  for (std::size_t bi = 0; bi < bars.size(); ++bi) {
    const double lx = left + 120.0 * static_cast<double>(bi % 6);
    const double ly = top + plot_h + 40.0 + 12.0 * static_cast<double>(bi / 6);
    std::string label = ctx.display(bars[bi].first);
    if (const auto s = stratum_label(bars[bi].second); !s.empty()) label += " " + s;
    os << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 8) << "\" width=\"8\" height=\"8\" fill=\""
       << palette[bi % 12] << "\"/><text x=\"" << num(lx + 11) << "\" y=\"" << num(ly) << "\">" << detail::xml_escape(label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------- files

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EmissionError("cannot write " + path.string());
  out << content;
  if (!out) throw EmissionError("write failed on " + path.string());
}

inline void write_table(const std::filesystem::path& dir, const RenderedTable& t) {
  write_file(dir / (t.id + ".md"), t.markdown);
  write_file(dir / (t.id + ".csv"), t.csv);
}

}  // namespace lpf
