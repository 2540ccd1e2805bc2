#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "thinkswitch/core.hpp"
#include "thinkswitch/entropy.hpp"
#include "thinkswitch/gateway.hpp"
#include "thinkswitch/profile.hpp"
#include "thinkswitch/prompts.hpp"
#include "thinkswitch/routing.hpp"
#include "thinkswitch/triggers.hpp"

namespace thinkswitch {

struct GenerationSettings {
  TokenCount max_output_tokens = kMaxOutputTokens;
  double temperature = 0.0;
  TokenCount judge_max_tokens = kJudgeMaxTokens;
  std::optional<std::uint64_t> seed;
};

/// Everything a strategy needs to serve one query. Strategies hold no state
/// of their own, so one context may be shared by concurrent workers as long
/// as the backend is thread-safe.
struct StrategyContext {
  CompletionBackend& backend;
  const ModelProfile& profile;
  const PromptSet& prompts;
  const TriggerLexicon& lexicon;
  EscalationRule rule;
  GenerationSettings settings;
};

/// Context whose escalation rule takes the profile's threshold and k.
StrategyContext make_context(CompletionBackend& backend, const ModelProfile& profile, const PromptSet& prompts,
                             const TriggerLexicon& lexicon, GenerationSettings settings = {});

/// nothink below 10 thinking tokens, think above 100, brief_think otherwise.
ModeLabel classify_mode(TokenCount thinking_tokens);

/// Single pass with the standard user message under a fixed mode.
StrategyOutcome run_fixed_mode(const Query& q, const StrategyContext& ctx, const ThinkingMode& mode,
                               std::string strategy_name);

StrategyOutcome run_full_think(const Query& q, const StrategyContext& ctx);
StrategyOutcome run_no_think(const Query& q, const StrategyContext& ctx);

/// Effort-tier baseline; capability failure for non-effort families.
StrategyOutcome run_budget_aware(const Query& q, const StrategyContext& ctx, EffortLevel level);

/// One pass with the family prompt-tuning system prompt; the model picks its
/// own depth and the decision log records the observed ModeLabel.
StrategyOutcome run_prompt_tuning(const Query& q, const StrategyContext& ctx);

/// Judge pass in the minimal mode, then a solve pass under the routed mode.
StrategyOutcome run_routing(const Query& q, const StrategyContext& ctx);

/// No-think pass, re-generated in full think when the output contains a
/// lexicon keyword.
StrategyOutcome run_spec_trigger(const Query& q, const StrategyContext& ctx);

/// No-think pass with top-k logprobs, re-generated in full think when the
/// escalation rule fires on per-token entropy.
StrategyOutcome run_spec_entropy(const Query& q, const StrategyContext& ctx);
StrategyOutcome run_spec_entropy(const Query& q, const StrategyContext& ctx, const EscalationRule& rule,
                                 std::string strategy_name);

// Building blocks shared with the presets.

/// Request under `mode` carrying the context's generation settings.
CompletionRequest base_request(const StrategyContext& ctx, const ThinkingMode& mode,
                               std::optional<std::string> system_prompt, std::string user_message);

/// Record a gateway/prompt failure on the builder.
void record_failure(OutcomeBuilder& builder, const std::exception& e);

}  // namespace thinkswitch
