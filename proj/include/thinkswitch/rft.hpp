#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinkswitch/strategies.hpp"
#include "thinkswitch/workers.hpp"

namespace thinkswitch {

/// Correctness of one response; may throw (e.g. a judge gateway error), in
/// which case the rollout is marked failed.
using CorrectnessFn = std::function<bool(const Query&, const ResponseTrace&)>;

struct Rollout {
  std::string problem_id;
  ThinkingMode mode;
  ResponseTrace response;
  bool correct = false;
  TokenCount tokens = 0;  // response.total_tokens
  std::optional<OutcomeError> error;

  bool failed() const { return error.has_value(); }
  bool operator==(const Rollout&) const = default;
};

struct RolloutSet {
  std::string problem_id;
  std::vector<ThinkingMode> modes;
  std::size_t K = 0;
  std::vector<Rollout> rollouts;  // mode-major: all K samples of modes[0], then modes[1], ...
};

class RewardError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RewardParams {
  double alpha = 1.0;
  double beta = 0.5;
  double t_ref = 0.0;
  std::size_t group_size = 8;

  /// Throws RewardError unless alpha, beta >= 0 and t_ref > 0.
  void validate() const;
};

struct RolloutOptions {
  /// System-prompt family stamped on every sample: "pt", "rt" or "baseline".
  std::string strategy = "pt";
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
};

/// The request a training rollout issues, identical to the inference prompt
/// of the chosen strategy.
ChatMessages rollout_messages(const Query& q, const StrategyContext& ctx, std::string_view strategy);

/// K graded rollouts per mode. Sample j of mode i uses seed
/// options.seed + i*K + j.
RolloutSet rollout_matrix(const Query& q, const std::vector<ThinkingMode>& modes, std::size_t K,
                          const StrategyContext& ctx, const CorrectnessFn& grade, const RolloutOptions& options = {});

/// Correct, token-minimal rollout; earliest on ties. Failed rollouts never
/// qualify.
std::optional<std::size_t> select_sft(const RolloutSet& set);

struct DpoIndexPair {
  std::size_t chosen = 0;
  std::size_t rejected = 0;
  bool operator==(const DpoIndexPair&) const = default;
};

/// chosen = select_sft; one pair per non-failed rollout that is incorrect or
/// strictly longer than the chosen one.
std::vector<DpoIndexPair> build_dpo_pairs(const RolloutSet& set);

double grpo_reward(bool correct, double t_r, const RewardParams& params);

/// R_i - mean(R). Throws std::invalid_argument on an empty group.
std::vector<double> group_advantages(const std::vector<double>& rewards);

/// Mode whose correct rollouts have the lowest mean token count; earliest
/// mode on ties; empty when no mode produced a correct rollout.
std::optional<ThinkingMode> routing_label(const RolloutSet& set);

/// Mean tokens of the set's non-failed rollouts under `mode`; empty if none.
std::optional<double> mean_tokens(const RolloutSet& set, const ThinkingMode& mode);

/// Judge-reply JSON that routes to `mode` for the profile's family.
std::string judge_reply_for(const ThinkingMode& mode, const ModelProfile& profile);

// ---------------------------------------------------------------------------
// Training records
// ---------------------------------------------------------------------------

struct Completion {
  std::string thinking;
  std::string answer;
  ThinkingMode mode;
  TokenCount tokens = 0;
  bool correct = false;
  bool operator==(const Completion&) const = default;
};

struct SftSample {
  std::string problem_id;
  std::string strategy;
  ChatMessages prompt;
  Completion target;
  double temperature = 1.0;
  bool operator==(const SftSample&) const = default;
};

struct DpoPair {
  std::string problem_id;
  std::string strategy;
  ChatMessages prompt;
  Completion chosen;
  Completion rejected;
  bool operator==(const DpoPair&) const = default;
};

struct GrpoRecord {
  std::string group_id;
  std::string problem_id;
  std::size_t index = 0;
  std::string strategy;
  ChatMessages prompt;
  Completion completion;
  double reward = 0.0;
  double advantage = 0.0;
  double t_ref = 0.0;
  bool operator==(const GrpoRecord&) const = default;
};

void to_json(nlohmann::json& j, const SftSample& s);
void from_json(const nlohmann::json& j, SftSample& s);
void to_json(nlohmann::json& j, const DpoPair& p);
void from_json(const nlohmann::json& j, DpoPair& p);
void to_json(nlohmann::json& j, const GrpoRecord& r);
void from_json(const nlohmann::json& j, GrpoRecord& r);

enum class TrainingFormat { sft, dpo, grpo_log };
std::string_view to_string(TrainingFormat f);
std::optional<TrainingFormat> parse_training_format(std::string_view text);

/// One JSON object per line, in the given order.
void export_training_file(const std::vector<SftSample>& samples, const std::filesystem::path& path);
void export_training_file(const std::vector<DpoPair>& pairs, const std::filesystem::path& path);
void export_training_file(const std::vector<GrpoRecord>& records, const std::filesystem::path& path);

std::vector<SftSample> parse_sft_file(const std::filesystem::path& path);
std::vector<DpoPair> parse_dpo_file(const std::filesystem::path& path);
std::vector<GrpoRecord> parse_grpo_log(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct RftConfig {
  std::string strategy = "pt";
  std::vector<ThinkingMode> modes;  // empty: the profile's native modes
  std::size_t K = 4;
  RewardParams reward;  // t_ref is filled per problem
  /// Draw fresh GRPO groups (modes cycled round-robin) instead of reusing
  /// the Step 1 rollouts.
  bool fresh_grpo_groups = true;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t concurrency = kDefaultConcurrency;
};

struct RftResult {
  std::vector<RolloutSet> sets;
  std::vector<SftSample> sft;
  std::vector<DpoPair> dpo;
  std::vector<GrpoRecord> grpo;
  std::vector<std::string> skipped;  // problems with no correct rollout
  std::vector<std::string> warnings;
};

/// Steps 1-4 over a dataset. Records follow dataset order.
RftResult run_rft(const std::vector<Query>& queries, const StrategyContext& ctx, const CorrectnessFn& grade,
                  const RftConfig& config);

}  // namespace thinkswitch
