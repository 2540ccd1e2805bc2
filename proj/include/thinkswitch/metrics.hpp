#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "thinkswitch/eval.hpp"

namespace thinkswitch {

inline constexpr std::string_view kAverageDataset = "AVG";

/// Per-(dataset, strategy) accuracy and mean tokens.
struct MetricsCell {
  std::string dataset;
  std::string strategy;
  double acc = 0.0;  // percent
  double tok = 0.0;  // mean output tokens
  std::size_t n = 0;
  std::size_t failed = 0;
};

struct MetricsRow {
  std::string dataset;  // or "AVG"
  std::string strategy;
  double acc = 0.0;
  double tok = 0.0;
  double red_pct = 0.0;  // 100 * (1 - tok / tok_baseline)
  std::size_t n = 0;
  std::size_t failed = 0;
};

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double reduction_pct(double tok, double tok_baseline);

/// Folds records into cells. Failed records count in the denominator.
std::vector<MetricsCell> summarize(const std::vector<EvalRecord>& records);

/// Rows per dataset plus one AVG row per strategy (unweighted means over
/// datasets; AVG red_pct is taken from the AVG tok values). Throws
/// MetricsError when the baseline lacks a dataset present for another
/// strategy.
std::vector<MetricsRow> compute_metrics(const std::vector<MetricsCell>& cells, std::string_view baseline);
std::vector<MetricsRow> compute_metrics(const std::vector<EvalRecord>& records, std::string_view baseline);

struct ParetoPoint {
  double acc = 0.0;
  double tok = 0.0;
  std::string label;
  bool operator==(const ParetoPoint&) const = default;
};

/// True iff a is at least as accurate and as cheap as b, strictly better in
/// one of the two.
bool dominates(const ParetoPoint& a, const ParetoPoint& b);

/// Non-dominated points, one per distinct (acc, tok), sorted by tok.
std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points);

/// Decision-log aggregates for one strategy.
struct DecisionAggregates {
  std::string strategy;
  std::size_t outcomes = 0;
  std::size_t failed = 0;
  std::size_t escalated = 0;
  std::size_t fallback = 0;
  std::size_t routed = 0;
  std::map<std::string, std::size_t> routing;  // mode label -> count
  std::map<std::string, std::size_t> mode_labels;

  double escalation_rate() const;
  double fallback_rate() const;
  double failure_rate() const;
};

std::vector<DecisionAggregates> aggregate_decisions(const std::vector<EvalResult>& results);

enum class ReportFormat { table, csv, records };
std::optional<ReportFormat> parse_report_format(std::string_view text);

/// Writes `out_dir`/metrics.{txt|csv} or `out_dir`/records.jsonl. The table
/// format also lists the Pareto frontier of the AVG rows and the decision
/// aggregates. Returns the written path.
std::filesystem::path emit_report(const std::vector<MetricsRow>& rows, const std::vector<EvalResult>& results,
                                  ReportFormat format, const std::filesystem::path& out_dir);

std::string render_csv(const std::vector<MetricsRow>& rows);
std::string render_table(const std::vector<MetricsRow>& rows, const std::vector<EvalResult>& results);

}  // namespace thinkswitch
