#include "cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "thinkswitch/config.hpp"
#include "thinkswitch/eval.hpp"
#include "thinkswitch/metrics.hpp"
#include "thinkswitch/mock.hpp"
#include "thinkswitch/rft.hpp"
#include "thinkswitch/workers.hpp"

namespace thinkswitch::cli {

using json = nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::vector<std::string> datasets;
  std::vector<std::string> strategies;
  std::string profile;
  std::string endpoint;
  std::string judge_endpoint;
  std::string baseline;
  std::string out;
  std::string assets;
  std::size_t concurrency = 0;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--dataset", o.datasets, "Dataset JSONL file (repeatable)");
  cmd->add_option("--profile", o.profile, "Model profile name");
  cmd->add_option("--endpoint", o.endpoint, "Endpoint URL or endpoint JSON file");
  cmd->add_option("--judge-endpoint", o.judge_endpoint, "Judge endpoint URL or JSON file");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--assets", o.assets, "Asset directory");
  cmd->add_option("--concurrency", o.concurrency, "Concurrent requests")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Sampling seed");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.datasets.empty()) c.datasets = o.datasets;
  if (!o.strategies.empty()) {
    c.strategies.clear();
    for (const auto& s : o.strategies) {
      std::size_t start = 0;
      while (start <= s.size()) {
        auto comma = s.find(',', start);
        auto part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!part.empty()) c.strategies.push_back(part);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
  }
  if (!o.profile.empty()) c.profile = o.profile;
  if (!o.endpoint.empty()) c.endpoint = parse_endpoint_arg(o.endpoint);
  if (!o.judge_endpoint.empty()) c.judge_endpoint = parse_endpoint_arg(o.judge_endpoint);
  if (!o.baseline.empty()) c.baseline = o.baseline;
  if (!o.out.empty()) c.out = o.out;
  if (!o.assets.empty()) c.assets = o.assets;
  if (o.concurrency) c.concurrency = o.concurrency;
  if (o.seed) c.seed = o.seed;
  return c;
}

/// Judge backend and its registries, kept alive for a command.
struct JudgeSetup {
  std::unique_ptr<HttpGateway> gateway;
  ModelProfile profile;
  std::unique_ptr<PromptSet> prompts;
};

GraderConfig make_grader(const RunConfig& c, const Runtime& rt, JudgeSetup& judge) {
  GraderConfig g;
  g.external_command = c.external_command;
  g.external_timeout = c.external_timeout;
  if (c.judge_endpoint) {
    judge.profile = c.judge_profile.empty() ? rt.profile : rt.profiles.get(c.judge_profile);
    judge.gateway = std::make_unique<HttpGateway>(*c.judge_endpoint, judge.profile);
    judge.prompts = std::make_unique<PromptSet>(rt.prompts);
    g.judge = JudgeEndpoint{judge.gateway.get(), &judge.profile, judge.prompts.get()};
  }
  return g;
}

std::filesystem::path records_path(const std::filesystem::path& out, const std::string& strategy,
                                   const std::string& dataset) {
  return out / (strategy + "." + dataset + ".jsonl");
}

bool is_transport_failure(const StrategyOutcome& o) { return o.error() && o.error()->kind == "transport"; }

void write_frontier(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::vector<ParetoPoint> points;
  for (const auto& r : rows) {
    if (r.dataset == kAverageDataset) points.push_back({r.acc, r.tok, r.strategy});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "strategy,acc,tok,on_frontier\n";
  for (const auto& p : points) {
    const bool on = std::none_of(points.begin(), points.end(), [&](const ParetoPoint& q) { return dominates(q, p); });
    out << fmt::format("{},{:.4f},{:.4f},{}\n", p.label, p.acc, p.tok, on ? 1 : 0);
  }
}

void write_reports(const std::vector<MetricsRow>& rows, const std::vector<EvalResult>& results,
                   const std::filesystem::path& out) {
  emit_report(rows, results, ReportFormat::table, out);
  emit_report(rows, results, ReportFormat::csv, out);
  write_frontier(rows, out / "frontier.csv");
}

int cmd_eval(const Overrides& o) {
  RunConfig c = resolve(o);
  if (c.datasets.empty()) throw ConfigError("no dataset given (use --dataset or 'datasets' in the config)");
  Runtime rt = load_runtime(c);

  HttpGateway backend(c.endpoint, rt.profile);
  const auto ctx = make_run_context(backend, rt, c);
  JudgeSetup judge;
  const auto grader = make_grader(c, rt, judge);

  std::vector<std::string> to_run = c.strategies;
  const bool baseline_requested = std::find(to_run.begin(), to_run.end(), c.baseline) != to_run.end();

  std::vector<EvalResult> all;
  std::size_t outcomes = 0, transport_failures = 0;
  for (const auto& file : c.datasets) {
    std::vector<Query> queries;
    try {
      queries = load_dataset(file);
    } catch (const DatasetError& e) {
      throw ConfigError(e.what());
    }
    const auto dataset = dataset_name(file);
    auto strategies = to_run;
    if (!baseline_requested) {
      auto base = records_path(c.out, c.baseline, dataset);
      if (std::filesystem::exists(base)) {
        auto prior = read_results(base);
        all.insert(all.end(), std::make_move_iterator(prior.begin()), std::make_move_iterator(prior.end()));
      } else {
        strategies.insert(strategies.begin(), c.baseline);
      }
    }
    for (const auto& strategy : strategies) {
      spdlog::info("eval {} on {} ({} problems)", strategy, dataset, queries.size());
      std::vector<EvalResult> results(queries.size());
      parallel_for(queries.size(), c.concurrency, [&](std::size_t i) {
        auto outcome = run_strategy(strategy, queries[i], ctx, rt.presets);
        results[i] = make_result(queries[i], dataset, std::move(outcome), grader);
      });
      for (const auto& r : results) {
        ++outcomes;
        if (is_transport_failure(r.outcome)) ++transport_failures;
      }
      write_results(results, records_path(c.out, strategy, dataset));
      all.insert(all.end(), std::make_move_iterator(results.begin()), std::make_move_iterator(results.end()));
    }
  }

  if (outcomes > 0 && transport_failures == outcomes) {
    std::cerr << "error: endpoint " << c.endpoint.base_url << " unreachable; every request failed after retries\n";
    return kEndpointUnreachable;
  }

  std::vector<EvalRecord> records;
  for (const auto& r : all) records.push_back(r.record);
  const auto rows = compute_metrics(records, c.baseline);
  write_reports(rows, all, c.out);
  std::cout << render_table(rows, all);
  return kOk;
}

int cmd_rft(const Overrides& o, std::optional<std::size_t> k, const std::string& strategy,
            const std::vector<std::string>& formats) {
  RunConfig c = resolve(o);
  if (k) c.rft.K = *k;
  if (!strategy.empty()) c.rft.strategy = strategy;
  if (!formats.empty()) c.rft.formats = formats;
  if (c.datasets.empty()) throw ConfigError("no dataset given (use --dataset or 'datasets' in the config)");
  Runtime rt = load_runtime(c);

  HttpGateway backend(c.endpoint, rt.profile);
  const auto ctx = make_run_context(backend, rt, c);
  JudgeSetup judge;
  const auto grader = make_grader(c, rt, judge);

  std::vector<Query> queries;
  std::set<std::string> seen;
  for (const auto& file : c.datasets) {
    try {
      for (auto& q : load_dataset(file)) {
        if (!seen.insert(q.id).second) throw ConfigError("duplicate problem id '" + q.id + "' across datasets");
        queries.push_back(std::move(q));
      }
    } catch (const DatasetError& e) {
      throw ConfigError(e.what());
    }
  }

  RftConfig rc;
  rc.strategy = c.rft.strategy;
  for (const auto& label : c.rft.modes) rc.modes.push_back(ThinkingMode::parse_label(label));
  rc.K = c.rft.K;
  rc.reward.alpha = c.rft.alpha;
  rc.reward.beta = c.rft.beta;
  rc.reward.group_size = c.rft.group_size;
  rc.fresh_grpo_groups = c.rft.fresh_grpo_groups;
  rc.temperature = c.rft.temperature;
  rc.seed = c.seed.value_or(0);
  rc.concurrency = c.concurrency;

  const CorrectnessFn grade = [&](const Query& q, const ResponseTrace& t) {
    return grade_response(q, t.answer_text, grader).correct;
  };
  const auto result = run_rft(queries, ctx, grade, rc);

  std::size_t rollouts = 0, transport = 0;
  for (const auto& set : result.sets) {
    for (const auto& r : set.rollouts) {
      ++rollouts;
      if (r.error && r.error->kind == "transport") ++transport;
    }
  }
  if (rollouts > 0 && transport == rollouts) {
    std::cerr << "error: endpoint " << c.endpoint.base_url << " unreachable; every rollout failed after retries\n";
    return kEndpointUnreachable;
  }

  std::filesystem::create_directories(c.out);
  for (const auto& name : c.rft.formats) {
    switch (*parse_training_format(name)) {
      case TrainingFormat::sft:
        export_training_file(result.sft, c.out / "sft.jsonl");
        if (result.sft.empty()) std::cerr << "warning: no correct rollouts; sft.jsonl is empty\n";
        break;
      case TrainingFormat::dpo:
        export_training_file(result.dpo, c.out / "dpo.jsonl");
        break;
      case TrainingFormat::grpo_log:
        export_training_file(result.grpo, c.out / "grpo-log.jsonl");
        break;
    }
  }
  std::cout << fmt::format("problems={} sft={} dpo={} grpo={} skipped={}\n", queries.size(), result.sft.size(),
                           result.dpo.size(), result.grpo.size(), result.skipped.size());
  return kOk;
}

int cmd_mock(const std::string& fixture, const std::string& host, int port) {
  MockScript script;
  try {
    script = script_from_fixture(fixture);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  MockServer server(std::move(script));
  try {
    server.start(host, port);
  } catch (const MockBindError& e) {
    pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
    std::cerr << "error: " << e.what() << "\n";
    return kBindFailure;
  }
  std::cout << "listening on " << server.base_url() << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
  std::cout << "served " << server.request_count() << " requests\n";
  return kOk;
}

std::vector<MetricsCell> load_cells(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open cells file " + path.string());
  try {
    const auto j = json::parse(in);
    if (!j.is_array()) throw ConfigError(path.string() + ": expected an array of cells");
    std::vector<MetricsCell> cells;
    for (const auto& e : j) {
      MetricsCell c;
      c.dataset = e.at("dataset").get<std::string>();
      c.strategy = e.at("strategy").get<std::string>();
      c.acc = e.at("acc").get<double>();
      c.tok = e.at("tok").get<double>();
      c.n = e.value("n", std::size_t{0});
      c.failed = e.value("failed", std::size_t{0});
      cells.push_back(std::move(c));
    }
    return cells;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

int cmd_report(const std::string& records_dir, const std::string& cells_file, const std::string& baseline,
               const std::string& out, const std::vector<std::string>& formats) {
  std::vector<ReportFormat> fmts;
  for (const auto& f : formats) {
    auto parsed = parse_report_format(f);
    if (!parsed) throw ConfigError("unknown report format '" + f + "' (known: table, csv, records)");
    fmts.push_back(*parsed);
  }

  std::vector<EvalResult> results;
  std::vector<MetricsRow> rows;
  try {
    if (!cells_file.empty()) {
      rows = compute_metrics(load_cells(cells_file), baseline);
    } else {
      if (!std::filesystem::is_directory(records_dir)) throw ConfigError("records directory not found: " + records_dir);
      results = read_results_dir(records_dir);
      if (results.empty()) throw ConfigError("no records found in " + records_dir);
      std::vector<EvalRecord> records;
      for (const auto& r : results) records.push_back(r.record);
      rows = compute_metrics(records, baseline);
    }
  } catch (const MetricsError& e) {
    throw ConfigError(e.what());
  }

  const std::filesystem::path out_dir = !out.empty() ? out : (records_dir.empty() ? std::string(".") : records_dir);
  if (fmts.empty()) {
    write_reports(rows, results, out_dir);
  } else {
    for (auto f : fmts) emit_report(rows, results, f, out_dir);
    write_frontier(rows, out_dir / "frontier.csv");
  }
  std::cout << render_table(rows, results);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Thinking-mode switching toolkit for hybrid-reasoning models", "thinkswitch"};
  app.require_subcommand(1);

  Overrides eval_o;
  auto* eval = app.add_subcommand("eval", "Run strategies over datasets and write records and metrics");
  add_common(eval, eval_o);
  eval->add_option("--strategy", eval_o.strategies, "Strategy or preset name (comma list or repeatable)");
  eval->add_option("--baseline", eval_o.baseline, "Baseline strategy for Red%");

  Overrides rft_o;
  std::optional<std::size_t> rft_k;
  std::string rft_strategy;
  std::vector<std::string> rft_formats;
  auto* rft = app.add_subcommand("rft", "Sample rollouts and export SFT, DPO and GRPO files");
  add_common(rft, rft_o);
  rft->add_option("--k", rft_k, "Rollouts per mode")->check(CLI::PositiveNumber);
  rft->add_option("--strategy", rft_strategy, "pt, rt or baseline")->check(CLI::IsMember({"pt", "rt", "baseline"}));
  rft->add_option("--format", rft_formats, "sft, dpo or grpo-log (repeatable)");

  std::string fixture, host = "127.0.0.1";
  int port = 8000;
  auto* mock = app.add_subcommand("mock", "Serve a scripted chat-completions endpoint");
  mock->add_option("--fixture", fixture, "Fixture JSONL file")->required();
  mock->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  mock->add_option("--host", host, "Bind address");

  std::string records_dir, cells_file, report_baseline = "full_think", report_out;
  std::vector<std::string> report_formats;
  auto* report = app.add_subcommand("report", "Compute metrics, Pareto frontier and CSV from records");
  auto* rec_opt = report->add_option("--records", records_dir, "Directory of records JSONL files");
  auto* cell_opt = report->add_option("--cells", cells_file, "JSON array of {dataset, strategy, acc, tok} cells");
  rec_opt->excludes(cell_opt);
  report->add_option("--baseline", report_baseline, "Baseline strategy for Red%");
  report->add_option("--out", report_out, "Output directory (default: the records directory)");
  report->add_option("--format", report_formats, "table, csv or records (repeatable; default table and csv)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (eval->parsed()) return cmd_eval(eval_o);
    if (rft->parsed()) return cmd_rft(rft_o, rft_k, rft_strategy, rft_formats);
    if (mock->parsed()) return cmd_mock(fixture, host, port);
    if (report->parsed()) {
      if (records_dir.empty() && cells_file.empty()) throw ConfigError("report needs --records or --cells");
      return cmd_report(records_dir, cells_file, report_baseline, report_out, report_formats);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const UnknownStrategyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kRuntimeFailure;
}

}  // namespace thinkswitch::cli
