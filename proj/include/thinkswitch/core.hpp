#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace thinkswitch {

using TokenCount = std::uint64_t;

struct ModelProfile;

// ---------------------------------------------------------------------------
// Thinking modes
// ---------------------------------------------------------------------------

enum class ModeKind { binary, effort, budget };

enum class EffortLevel { low, medium, high };

std::string_view to_string(ModeKind kind);
std::string_view to_string(EffortLevel level);
std::optional<EffortLevel> parse_effort(std::string_view text);

/// Binary think switch. A think pass may carry a thinking-token cap for
/// endpoints that accept one alongside the switch.
struct BinaryMode {
  bool think = true;
  std::optional<TokenCount> budget;
  bool operator==(const BinaryMode&) const = default;
};

struct EffortMode {
  EffortLevel level = EffortLevel::high;
  bool operator==(const EffortMode&) const = default;
};

/// Numeric thinking budget; zero disables thinking.
struct BudgetMode {
  TokenCount tokens = 0;
  bool operator==(const BudgetMode&) const = default;
};

/// The reasoning-depth control for one generation pass.
class ThinkingMode {
 public:
  using Variant = std::variant<BinaryMode, EffortMode, BudgetMode>;

  ThinkingMode() = default;
  ThinkingMode(BinaryMode m) : value_(m) {}
  ThinkingMode(EffortMode m) : value_(m) {}
  ThinkingMode(BudgetMode m) : value_(m) {}

  static ThinkingMode think() { return BinaryMode{true, std::nullopt}; }
  static ThinkingMode no_think() { return BinaryMode{false, std::nullopt}; }
  static ThinkingMode think_with_budget(TokenCount b) { return BinaryMode{true, b}; }
  static ThinkingMode effort(EffortLevel l) { return EffortMode{l}; }
  static ThinkingMode budget(TokenCount b) { return BudgetMode{b}; }

  ModeKind kind() const { return static_cast<ModeKind>(value_.index()); }
  const Variant& value() const { return value_; }

  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(&value_);
  }

  /// Compact label: "think", "no_think", "think@1024", "effort:high",
  /// "budget:512".
  std::string label() const;
  static ThinkingMode parse_label(std::string_view label);

  bool operator==(const ThinkingMode&) const = default;

 private:
  Variant value_{BinaryMode{}};
};

void to_json(nlohmann::json& j, const ThinkingMode& mode);
void from_json(const nlohmann::json& j, ThinkingMode& mode);

/// True iff the mode kind matches the profile's native interface and any
/// budget lies in [0, B_max].
bool validate_mode(const ThinkingMode& mode, const ModelProfile& profile);

// ---------------------------------------------------------------------------
// Queries and responses
// ---------------------------------------------------------------------------

enum class Domain { math, science, code };

std::string_view to_string(Domain d);
std::optional<Domain> parse_domain(std::string_view text);

struct Query {
  std::string id;
  Domain domain = Domain::math;
  std::string problem;
  std::string reference;
  /// Opaque payload forwarded to an external grader (code problems).
  nlohmann::json grader_payload;
};

struct TokenCandidate {
  std::string token;
  double logprob = 0.0;
  bool operator==(const TokenCandidate&) const = default;
};

/// One generated token with its top-k alternatives.
struct TokenLogprobs {
  std::string token;
  double logprob = 0.0;
  std::vector<TokenCandidate> top;
  bool operator==(const TokenLogprobs&) const = default;
};

/// How the thinking/answer token split was obtained.
enum class TokenSplit { reported, estimated, unavailable };

std::string_view to_string(TokenSplit s);

struct ResponseTrace {
  std::string thinking_text;
  std::string answer_text;
  TokenCount thinking_tokens = 0;
  TokenCount answer_tokens = 0;
  TokenCount total_tokens = 0;
  TokenSplit split = TokenSplit::reported;
  std::string finish_reason;
  std::optional<std::vector<TokenLogprobs>> per_token_logprobs;

  bool operator==(const ResponseTrace&) const = default;
};

void to_json(nlohmann::json& j, const ResponseTrace& t);
void from_json(const nlohmann::json& j, ResponseTrace& t);

/// Post-hoc label of how much a response actually thought.
enum class ModeLabel { nothink, brief_think, think };

std::string_view to_string(ModeLabel label);

// ---------------------------------------------------------------------------
// Strategy outcomes
// ---------------------------------------------------------------------------

struct Pass {
  std::string role;  // "solve", "judge", "fast", "escalation", "sample", ...
  ThinkingMode mode;
  ResponseTrace trace;
  bool operator==(const Pass&) const = default;
};

struct DecisionEvent {
  std::string kind;
  nlohmann::json detail;
  bool operator==(const DecisionEvent&) const = default;
};

struct OutcomeError {
  std::string kind;
  std::string message;
  bool operator==(const OutcomeError&) const = default;
};

/// One query's full trace under one strategy. Built through OutcomeBuilder so
/// that total_tokens always equals the pass sum.
class StrategyOutcome {
 public:
  const std::string& query_id() const { return query_id_; }
  const std::string& strategy_name() const { return strategy_name_; }
  const std::vector<Pass>& passes() const { return passes_; }
  const std::vector<DecisionEvent>& decision_log() const { return decision_log_; }
  const std::string& final_answer() const { return final_answer_; }
  TokenCount total_tokens() const { return total_tokens_; }
  /// Index of the pass the final answer was taken from; the last pass unless
  /// a sample-and-select strategy picked another.
  std::optional<std::size_t> final_pass() const { return final_pass_; }
  bool failed() const { return error_.has_value(); }
  const std::optional<OutcomeError>& error() const { return error_; }

  /// First decision event with the given kind, if any.
  const DecisionEvent* find_event(std::string_view kind) const;

  bool operator==(const StrategyOutcome&) const = default;

  friend class OutcomeBuilder;
  friend void from_json(const nlohmann::json& j, StrategyOutcome& o);

 private:
  std::string query_id_;
  std::string strategy_name_;
  std::vector<Pass> passes_;
  std::vector<DecisionEvent> decision_log_;
  std::string final_answer_;
  TokenCount total_tokens_ = 0;
  std::optional<std::size_t> final_pass_;
  std::optional<OutcomeError> error_;
};

void to_json(nlohmann::json& j, const StrategyOutcome& o);
void from_json(const nlohmann::json& j, StrategyOutcome& o);

class OutcomeBuilder {
 public:
  OutcomeBuilder(std::string query_id, std::string strategy_name);

  OutcomeBuilder& add_pass(std::string role, ThinkingMode mode, ResponseTrace trace);
  OutcomeBuilder& log(std::string kind, nlohmann::json detail = nlohmann::json::object());
  OutcomeBuilder& select_pass(std::size_t index);
  OutcomeBuilder& fail(std::string kind, std::string message);

  std::size_t pass_count() const { return outcome_.passes_.size(); }
  StrategyOutcome build() &&;

 private:
  StrategyOutcome outcome_;
};

/// Thrown when a persisted record violates the documented schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace thinkswitch
