#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinkswitch/strategies.hpp"

namespace thinkswitch {

/// A named parameterisation of one of the external-method executors.
struct PresetConfig {
  std::string name;
  std::string base_strategy;  // s1, tale, budget_guidance, sot, cod, dynathink, deer, rasc, hdflow, spec_entropy
  nlohmann::json params = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const PresetConfig& p);
void from_json(const nlohmann::json& j, PresetConfig& p);

class UnknownStrategyError : public std::invalid_argument {
 public:
  UnknownStrategyError(const std::string& name, const std::vector<std::string>& known);
};

class PresetRegistry {
 public:
  /// Reads a JSON array of presets.
  static PresetRegistry load(const std::filesystem::path& file);

  void add(PresetConfig preset);
  bool contains(std::string_view name) const;
  const PresetConfig& get(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::vector<PresetConfig> presets_;
};

/// Executes the preset's base strategy with its parameters. Unknown base
/// strategies raise UnknownStrategyError; capability mismatches produce a
/// failed outcome.
StrategyOutcome run_preset(const Query& q, const StrategyContext& ctx, const PresetConfig& preset);

/// Built-in strategy names: baselines and the three switching strategies.
const std::vector<std::string>& builtin_strategy_names();

/// Every runnable name, built-ins first, then presets in load order.
std::vector<std::string> strategy_names(const PresetRegistry& presets);

bool is_known_strategy(std::string_view name, const PresetRegistry& presets);

/// Runs a built-in strategy or a preset by name.
StrategyOutcome run_strategy(std::string_view name, const Query& q, const StrategyContext& ctx,
                             const PresetRegistry& presets);

// Pieces of the presets exposed for testing.

struct RascSample {
  std::string answer_key;
  TokenCount tokens = 0;
};

struct RascWeights {
  double consistency = 0.7;
  double brevity = 0.3;
};

/// Index of the winning sample: highest consistency·w_c + brevity·w_b, where
/// consistency is the share of samples agreeing with the sample's answer and
/// brevity is min_tokens / tokens. Ties go to the earliest sample.
std::size_t rasc_select(const std::vector<RascSample>& samples, const RascWeights& weights);

/// Share of samples carrying the most common answer key.
double modal_agreement(const std::vector<RascSample>& samples);

struct EarlyExit {
  std::size_t token_index = 0;  // first token of the transition pattern
  std::size_t char_offset = 0;  // offset of that token in the thinking text
  std::string pattern;
  double confidence = 0.0;
};

struct DeerParams {
  double confidence_threshold = 0.85;
  std::size_t min_thinking_tokens = 50;
  std::size_t window = 16;
  std::vector<std::string> patterns;
};

/// First transition point in the thinking tokens where the mean top-1
/// probability of the preceding window reaches the threshold.
std::optional<EarlyExit> find_early_exit(const std::vector<TokenLogprobs>& tokens, std::size_t thinking_tokens,
                                         const DeerParams& params);

/// Complexity score used by the rule-based router.
int hdflow_score(std::string_view problem, const nlohmann::json& params);

}  // namespace thinkswitch
