#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinkswitch/core.hpp"
#include "thinkswitch/gateway.hpp"
#include "thinkswitch/profile.hpp"
#include "thinkswitch/prompts.hpp"

namespace thinkswitch {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::string file, std::size_t line, const std::string& message);
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// Line-delimited {id, domain, problem, reference, grader_payload?}. Blank
/// lines are skipped; ids must be unique.
std::vector<Query> load_dataset(const std::filesystem::path& path);
std::vector<Query> parse_dataset(std::string_view text, const std::string& source = "<memory>");

/// Dataset name used in reports: the file stem.
std::string dataset_name(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Grading
// ---------------------------------------------------------------------------

/// Math: last boxed expression against the reference; MCQ: final option
/// letter. Empty when nothing can be extracted, or when a math mismatch is
/// not decidable by string or numeric comparison.
std::optional<bool> grade_rule_based(const Query& q, std::string_view response_text);

/// Parses {"correct": bool} from a judge reply; anything else is false.
bool parse_judge_verdict(std::string_view reply);

struct JudgeEndpoint {
  CompletionBackend* backend = nullptr;
  const ModelProfile* profile = nullptr;
  const PromptSet* prompts = nullptr;
};

/// Asks the judge model; gateway errors propagate.
bool grade_llm_judge(const Query& q, std::string_view reference, std::string_view response_text,
                     const JudgeEndpoint& judge);

enum class ExternalStatus { passed, failed_check, timeout, spawn_failure };
std::string_view to_string(ExternalStatus s);

struct ExternalResult {
  ExternalStatus status = ExternalStatus::failed_check;
  int exit_code = -1;
  bool correct() const { return status == ExternalStatus::passed; }
};

/// Runs `command` through /bin/sh with a JSON document
/// {id, domain, problem, reference, grader_payload, response} on standard
/// input. Exit status 0 is correct; 127 (command not found) and fork/exec
/// failures are spawn failures.
ExternalResult grade_external(const Query& q, std::string_view response_text, const std::string& command,
                              std::chrono::milliseconds timeout);

struct GraderConfig {
  JudgeEndpoint judge;  // backend == nullptr: no judge
  std::optional<std::string> external_command;
  std::chrono::milliseconds external_timeout{60000};
};

struct Grade {
  bool correct = false;
  bool failed = false;   // the grader itself could not run
  std::string method;    // rule, judge, external, none
  std::string note;
};

/// Rule-based first. Math with an empty extraction or a mismatch, and
/// science with no letter, go to the judge when configured. Code goes to the
/// external command, else the judge.
Grade grade_response(const Query& q, std::string_view response_text, const GraderConfig& config);

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct EvalRecord {
  std::string query_id;
  std::string dataset;
  std::string strategy_name;
  bool correct = false;
  TokenCount total_tokens = 0;
  bool failed = false;
  bool operator==(const EvalRecord&) const = default;
};

/// One line of a records file: the graded outcome.
struct EvalResult {
  EvalRecord record;
  Grade grade;
  StrategyOutcome outcome;
};

/// Outcome fields plus dataset, correct and grade.
nlohmann::json result_to_json(const EvalResult& r);
EvalResult result_from_json(const nlohmann::json& j);

/// Grades an outcome into a record; failed outcomes are incorrect.
EvalResult make_result(const Query& q, const std::string& dataset, StrategyOutcome outcome, const GraderConfig& config);

void write_results(const std::vector<EvalResult>& results, const std::filesystem::path& path);
std::vector<EvalResult> read_results(const std::filesystem::path& path);

/// Every *.jsonl under `dir`, in file-name order.
std::vector<EvalResult> read_results_dir(const std::filesystem::path& dir);

}  // namespace thinkswitch
