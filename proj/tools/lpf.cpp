// lpf: command-line front end for the evaluation harness.
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration or usage
// error, 3 missing inputs (records, replay entries), 4 backend failure,
// 5 malformed backend response.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "lpf/lpf.hpp"

namespace {

struct Common {
  std::string config;
  lpf::ConfigOverrides overrides;
  std::string seeds;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("-c,--config", c.config, "Run configuration (TOML or JSON)");
  if (config_required) opt->required();
  cmd->add_option_function<std::string>("--replay-dir", [&c](const std::string& v) { c.overrides.replay_dir = std::filesystem::absolute(v).string(); },
                                        "Serve model calls from recorded responses");
  cmd->add_option_function<std::string>("--endpoint", [&c](const std::string& v) { c.overrides.endpoint = v; },
                                        "Model bridge base URL");
  cmd->add_option("--seeds", c.seeds, "Comma-separated seeds, overriding the configuration");
  cmd->add_option_function<std::string>("--out", [&c](const std::string& v) { c.overrides.out = std::filesystem::absolute(v).string(); },
                                        "Output root directory");
  cmd->add_option_function<std::string>("--stdev-axis", [&c](const std::string& v) { c.overrides.stdev_axis = v; },
                                        "seeds (default) or cells")
      ->check(CLI::IsMember({"seeds", "cells"}));
}

lpf::PipelineEnv make_env() {
  lpf::PipelineEnv env;
  if (const char* dir = std::getenv("LPF_CACHE_DIR"); dir && *dir) env.cache_dir = dir;
  env.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  env.connect = [](const std::string& endpoint) -> std::unique_ptr<lpf::Backend> {
    auto http = std::make_unique<lpf::HttpBackend>(endpoint);
    if (!http->reachable()) throw lpf::TransportError("backend unreachable at " + endpoint);
    return http;
  };
  return env;
}

lpf::Workspace open_workspace(Common& c) {
  if (!c.seeds.empty()) c.overrides.seeds = lpf::detail::parse_seed_list(c.seeds);
  return lpf::Workspace(lpf::load_config(c.config, c.overrides), make_env());
}

void print_report(const lpf::ReportSummary& r) {
  std::cout << "report written to " << r.dir.string() << " (" << r.artifacts.size() << " files)\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation harness for controlled text generation techniques"};
  app.require_subcommand(1);

  Common gen_opts, score_opts, eval_opts, report_opts, cmp_opts;
  auto* generate = app.add_subcommand("generate", "Produce generation records for every experiment cell");
  add_common(generate, gen_opts);
  auto* score = app.add_subcommand("score", "Classify and score every generation record");
  add_common(score, score_opts);
  auto* evaluate = app.add_subcommand("evaluate", "Compute metrics and emit the report");
  add_common(evaluate, eval_opts);
  auto* report = app.add_subcommand("report", "Re-emit the report from stored metrics");
  add_common(report, report_opts);

  auto* compare = app.add_subcommand("compare-original", "Correlate LPF scores with originally reported scores");
  add_common(compare, cmp_opts, false);
  std::string originals;
  std::string compare_out = "out/compare_original";
  compare->add_option("--originals", originals, "CSV of transcribed original scores")->check(CLI::ExistingFile);
  compare->add_option("--report-dir", compare_out, "Where to write the comparison table");

  auto* bench = app.add_subcommand("classifier-benchmark", "Measure a classifier on a labelled benchmark");
  std::string bench_file, bench_clf, bench_task = "sentiment", bench_style = "distribution", bench_positive,
                                     bench_replay, bench_endpoint, bench_out = "out/benchmark";
  bench->add_option("--benchmark", bench_file, "TSV file of label<TAB>text")->required()->check(CLI::ExistingFile);
  bench->add_option("--classifier", bench_clf, "Classifier model id")->required();
  bench->add_option("--task", bench_task, "sentiment or topic")->check(CLI::IsMember({"sentiment", "topic"}));
  bench->add_option("--style", bench_style, "Verdict style")
      ->check(CLI::IsMember({"distribution", "per_topic_binary"}));
  bench->add_option("--positive", bench_positive, "Positive label for binary precision/recall");
  bench->add_option("--replay-dir", bench_replay, "Serve model calls from recorded responses");
  bench->add_option("--endpoint", bench_endpoint, "Model bridge base URL");
  bench->add_option("--out", bench_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      auto ws = open_workspace(gen_opts);
      const auto s = lpf::cmd_generate(ws);
      std::cout << "generate: " << s.cells << " cells, " << s.generated << " generated, " << s.failed << " failed, "
                << s.already_done << " already present\n";
    } else if (*score) {
      auto ws = open_workspace(score_opts);
      const auto s = lpf::cmd_score(ws);
      std::cout << "score: " << s.records << " records, " << s.scored << " scored, " << s.failed << " failed, "
                << s.already_done << " already present\n";
    } else if (*evaluate) {
      auto ws = open_workspace(eval_opts);
      print_report(lpf::cmd_evaluate(ws));
    } else if (*report) {
      auto ws = open_workspace(report_opts);
      print_report(lpf::cmd_report(ws));
    } else if (*compare) {
      lpf::OriginalReport rep;
      if (!cmp_opts.config.empty()) {
        auto ws = open_workspace(cmp_opts);
        const auto& cfg = ws.config();
        const auto path = originals.empty() ? cfg.originals_file : std::optional<std::filesystem::path>(originals);
        if (!path) throw lpf::ConfigError("no originals file: pass --originals or set `originals` in the configuration");
        const auto metrics = lpf::read_metric_cells(cfg.metrics_path());
        rep = lpf::cmd_compare_original(*path, cfg.reports_dir(), &metrics, lpf::detail::report_context(ws));
      } else {
        if (originals.empty()) throw lpf::ConfigError("pass --originals (and optionally --config)");
        rep = lpf::cmd_compare_original(originals, compare_out);
      }
      std::cout << "compare-original: n=" << rep.correlation.n << " pearson=" << lpf::stats::format_fixed(rep.correlation.pearson_r, 4)
                << " spearman=" << lpf::stats::format_fixed(rep.correlation.spearman_rho, 4) << '\n';
    } else if (*bench) {
      std::unique_ptr<lpf::Backend> backend;
      if (!bench_replay.empty()) {
        backend = std::make_unique<lpf::ReplayBackend>(bench_replay);
      } else if (!bench_endpoint.empty()) {
        auto http = std::make_unique<lpf::HttpBackend>(bench_endpoint);
        if (!http->reachable()) throw lpf::TransportError("backend unreachable at " + bench_endpoint);
        backend = std::move(http);
      } else {
        throw lpf::ConfigError("pass --replay-dir or --endpoint");
      }
      const auto env = make_env();
      std::unique_ptr<lpf::ScoreCache> cache;
      if (env.cache_dir) cache = std::make_unique<lpf::ScoreCache>(*env.cache_dir);
      lpf::ScoringClient client(*backend, cache.get());
      lpf::BenchmarkRequest req;
      req.benchmark_file = bench_file;
      req.classifier.id = bench_clf;
      req.classifier.task = lpf::parse_attribute(bench_task);
      req.classifier.style =
          bench_style == "per_topic_binary" ? lpf::VerdictStyle::PerTopicBinary : lpf::VerdictStyle::Distribution;
      if (!bench_positive.empty()) req.positive_label = bench_positive;
      const auto m = lpf::cmd_classifier_benchmark(req, client, bench_out);
      std::cout << "classifier-benchmark " << bench_clf << ": acc=" << lpf::stats::format_fixed(m.accuracy, 2)
                << " f1=" << lpf::stats::format_fixed(m.f1, 2) << " precision=" << lpf::stats::format_fixed(m.precision, 2)
                << " recall=" << lpf::stats::format_fixed(m.recall, 2) << " n=" << m.n << '\n';
    }
  } catch (const lpf::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const lpf::MissingRecord& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const lpf::PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const lpf::LoadError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const lpf::TransportError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return 4;
  } catch (const lpf::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
