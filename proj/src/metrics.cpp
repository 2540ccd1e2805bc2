#include "thinkswitch/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <spdlog/fmt/fmt.h>

namespace thinkswitch {

double reduction_pct(double tok, double tok_baseline) {
  if (!(tok_baseline > 0.0)) throw MetricsError("baseline token count must be positive");
  return 100.0 * (1.0 - tok / tok_baseline);
}

std::vector<MetricsCell> summarize(const std::vector<EvalRecord>& records) {
  struct Acc {
    std::size_t n = 0, correct = 0, failed = 0;
    double tokens = 0.0;
  };
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (const auto& r : records) {
    auto& a = groups[{r.strategy_name, r.dataset}];
    ++a.n;
    if (r.correct && !r.failed) ++a.correct;
    if (r.failed) ++a.failed;
    a.tokens += static_cast<double>(r.total_tokens);
  }
  std::vector<MetricsCell> cells;
  for (const auto& [key, a] : groups) {
    MetricsCell c;
    c.strategy = key.first;
    c.dataset = key.second;
    c.n = a.n;
    c.failed = a.failed;
    c.acc = 100.0 * static_cast<double>(a.correct) / static_cast<double>(a.n);
    c.tok = a.tokens / static_cast<double>(a.n);
    cells.push_back(std::move(c));
  }
  return cells;
}

std::vector<MetricsRow> compute_metrics(const std::vector<MetricsCell>& cells, std::string_view baseline) {
  std::map<std::string, std::map<std::string, const MetricsCell*>> by_strategy;
  for (const auto& c : cells) {
    if (c.dataset == kAverageDataset) throw MetricsError("dataset name 'AVG' is reserved");
    auto& slot = by_strategy[c.strategy][c.dataset];
    if (slot) throw MetricsError("duplicate cell for " + c.strategy + " on " + c.dataset);
    slot = &c;
  }
  auto base_it = by_strategy.find(std::string(baseline));
  if (base_it == by_strategy.end()) throw MetricsError("baseline strategy '" + std::string(baseline) + "' has no records");
  const auto& base = base_it->second;
  for (const auto& [strategy, datasets] : by_strategy) {
    for (const auto& [dataset, cell] : datasets) {
      if (!base.count(dataset)) {
        throw MetricsError("baseline '" + std::string(baseline) + "' has no records for dataset '" + dataset + "'");
      }
    }
  }

  auto averages = [](const std::map<std::string, const MetricsCell*>& ds) {
    double acc = 0.0, tok = 0.0;
    std::size_t n = 0, failed = 0;
    for (const auto& [name, c] : ds) {
      acc += c->acc;
      tok += c->tok;
      n += c->n;
      failed += c->failed;
    }
    const double k = static_cast<double>(ds.size());
    return MetricsRow{std::string(kAverageDataset), "", acc / k, tok / k, 0.0, n, failed};
  };
  const auto base_avg = averages(base);

  std::vector<std::string> order;
  order.emplace_back(baseline);
  for (const auto& [strategy, _] : by_strategy) {
    if (strategy != baseline) order.push_back(strategy);
  }

  std::vector<MetricsRow> rows;
  for (const auto& strategy : order) {
    const auto& ds = by_strategy.at(strategy);
    for (const auto& [dataset, c] : ds) {
      rows.push_back(MetricsRow{dataset, strategy, c->acc, c->tok, reduction_pct(c->tok, base.at(dataset)->tok), c->n,
                                c->failed});
    }
    auto avg = averages(ds);
    avg.strategy = strategy;
    avg.red_pct = reduction_pct(avg.tok, base_avg.tok);
    rows.push_back(std::move(avg));
  }
  return rows;
}

std::vector<MetricsRow> compute_metrics(const std::vector<EvalRecord>& records, std::string_view baseline) {
  return compute_metrics(summarize(records), baseline);
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  return a.acc >= b.acc && a.tok <= b.tok && (a.acc > b.acc || a.tok < b.tok);
}

std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points) {
  std::vector<ParetoPoint> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const bool dominated =
        std::any_of(points.begin(), points.end(), [&](const ParetoPoint& o) { return dominates(o, p); });
    if (dominated) continue;
    const bool duplicate =
        std::any_of(out.begin(), out.end(), [&](const ParetoPoint& o) { return o.acc == p.acc && o.tok == p.tok; });
    if (!duplicate) out.push_back(p);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.tok < b.tok; });
  return out;
}

double DecisionAggregates::escalation_rate() const {
  return outcomes ? static_cast<double>(escalated) / static_cast<double>(outcomes) : 0.0;
}
double DecisionAggregates::fallback_rate() const {
  return routed ? static_cast<double>(fallback) / static_cast<double>(routed) : 0.0;
}
double DecisionAggregates::failure_rate() const {
  return outcomes ? static_cast<double>(failed) / static_cast<double>(outcomes) : 0.0;
}

std::vector<DecisionAggregates> aggregate_decisions(const std::vector<EvalResult>& results) {
  std::map<std::string, DecisionAggregates> by;
  for (const auto& r : results) {
    auto& a = by[r.record.strategy_name];
    a.strategy = r.record.strategy_name;
    ++a.outcomes;
    if (r.record.failed) ++a.failed;
    bool escalated = false;
    for (const auto& ev : r.outcome.decision_log()) {
      if (ev.detail.is_object() && ev.detail.value("escalate", false)) escalated = true;
      if (ev.kind == "routing") {
        ++a.routed;
        ++a.routing[ev.detail.value("mode", std::string("?"))];
        if (ev.detail.value("source", std::string()) == "fallback") ++a.fallback;
      } else if (ev.kind == "mode_label") {
        ++a.mode_labels[ev.detail.value("label", std::string("?"))];
      }
    }
    if (escalated) ++a.escalated;
  }
  std::vector<DecisionAggregates> out;
  for (auto& [_, a] : by) out.push_back(std::move(a));
  return out;
}

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "table") return ReportFormat::table;
  if (text == "csv") return ReportFormat::csv;
  if (text == "records") return ReportFormat::records;
  return std::nullopt;
}

std::string render_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "dataset,strategy,n,failed,acc,tok,red_pct\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{:.4f},{:.4f},{:.4f}\n", r.dataset, r.strategy, r.n, r.failed, r.acc, r.tok,
                       r.red_pct);
  }
  return out;
}

std::string render_table(const std::vector<MetricsRow>& rows, const std::vector<EvalResult>& results) {
  std::size_t ds_w = 7, st_w = 8;
  for (const auto& r : rows) {
    ds_w = std::max(ds_w, r.dataset.size());
    st_w = std::max(st_w, r.strategy.size());
  }
  std::string out = fmt::format("{:<{}}  {:<{}}  {:>6}  {:>6}  {:>7}  {:>10}  {:>8}\n", "dataset", ds_w, "strategy",
                                st_w, "n", "failed", "acc", "tok", "red%");
  for (const auto& r : rows) {
    out += fmt::format("{:<{}}  {:<{}}  {:>6}  {:>6}  {:>7.2f}  {:>10.1f}  {:>+8.2f}\n", r.dataset, ds_w, r.strategy,
                       st_w, r.n, r.failed, r.acc, r.tok, r.red_pct);
  }

  std::vector<ParetoPoint> points;
  for (const auto& r : rows) {
    if (r.dataset == kAverageDataset) points.push_back({r.acc, r.tok, r.strategy});
  }
  if (!points.empty()) {
    out += "\nPareto frontier (AVG acc vs tok)\n";
    for (const auto& p : pareto_frontier(points)) out += fmt::format("  {:<{}}  {:>7.2f}  {:>10.1f}\n", p.label, st_w, p.acc, p.tok);
  }

  const auto aggs = aggregate_decisions(results);
  if (!aggs.empty()) {
    out += "\nDecisions\n";
    for (const auto& a : aggs) {
      out += fmt::format("  {:<{}}  outcomes={} failure_rate={:.4f} escalation_rate={:.4f}", a.strategy, st_w,
                         a.outcomes, a.failure_rate(), a.escalation_rate());
      if (a.routed) {
        out += fmt::format(" fallback_rate={:.4f} routing={{", a.fallback_rate());
        bool first = true;
        for (const auto& [mode, count] : a.routing) {
          out += fmt::format("{}{}:{}", first ? "" : ", ", mode, count);
          first = false;
        }
        out += "}";
      }
      if (!a.mode_labels.empty()) {
        out += " mode_labels={";
        bool first = true;
        for (const auto& [label, count] : a.mode_labels) {
          out += fmt::format("{}{}:{}", first ? "" : ", ", label, count);
          first = false;
        }
        out += "}";
      }
      out += "\n";
    }
  }
  return out;
}

std::filesystem::path emit_report(const std::vector<MetricsRow>& rows, const std::vector<EvalResult>& results,
                                  ReportFormat format, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (format == ReportFormat::records) {
    auto sorted = results;
    std::stable_sort(sorted.begin(), sorted.end(), [](const EvalResult& a, const EvalResult& b) {
      return std::tie(a.record.strategy_name, a.record.dataset, a.record.query_id) <
             std::tie(b.record.strategy_name, b.record.dataset, b.record.query_id);
    });
    auto path = out_dir / "records.jsonl";
    write_results(sorted, path);
    return path;
  }
  auto path = out_dir / (format == ReportFormat::csv ? "metrics.csv" : "metrics.txt");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << (format == ReportFormat::csv ? render_csv(rows) : render_table(rows, results));
  if (!out) throw std::runtime_error("write failed for " + path.string());
  return path;
}

}  // namespace thinkswitch
