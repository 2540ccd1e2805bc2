#include "thinkswitch/strategies.hpp"

#include <algorithm>

namespace thinkswitch {

using nlohmann::json;

StrategyContext make_context(CompletionBackend& backend, const ModelProfile& profile, const PromptSet& prompts,
                             const TriggerLexicon& lexicon, GenerationSettings settings) {
  EscalationRule rule;
  rule.threshold = profile.entropy_threshold;
  rule.k = profile.logprob_k;
  return StrategyContext{backend, profile, prompts, lexicon, rule, settings};
}

ModeLabel classify_mode(TokenCount thinking_tokens) {
  if (thinking_tokens < 10) return ModeLabel::nothink;
  if (thinking_tokens > 100) return ModeLabel::think;
  return ModeLabel::brief_think;
}

CompletionRequest base_request(const StrategyContext& ctx, const ThinkingMode& mode,
                               std::optional<std::string> system_prompt, std::string user_message) {
  auto req = CompletionRequest::for_mode(ctx.profile, mode, std::move(system_prompt), std::move(user_message));
  req.max_output_tokens = std::min(req.max_output_tokens, ctx.settings.max_output_tokens);
  req.temperature = ctx.settings.temperature;
  req.seed = ctx.settings.seed;
  return req;
}

void record_failure(OutcomeBuilder& builder, const std::exception& e) {
  std::string kind = "internal";
  if (auto g = dynamic_cast<const GatewayError*>(&e)) {
    kind = std::string(to_string(g->kind()));
  } else if (dynamic_cast<const PromptError*>(&e)) {
    kind = "prompt";
  } else if (dynamic_cast<const EntropyError*>(&e)) {
    kind = "entropy";
  }
  builder.fail(std::move(kind), e.what());
}

StrategyOutcome run_fixed_mode(const Query& q, const StrategyContext& ctx, const ThinkingMode& mode,
                               std::string strategy_name) {
  OutcomeBuilder out(q.id, std::move(strategy_name));
  try {
    auto trace = ctx.backend.complete(base_request(ctx, mode, std::nullopt, render_user_message(q, ctx.prompts)));
    out.add_pass("solve", mode, std::move(trace));
  } catch (const std::exception& e) {
    record_failure(out, e);
  }
  return std::move(out).build();
}

StrategyOutcome run_full_think(const Query& q, const StrategyContext& ctx) {
  return run_fixed_mode(q, ctx, full_think_mode(ctx.profile), "full_think");
}

StrategyOutcome run_no_think(const Query& q, const StrategyContext& ctx) {
  return run_fixed_mode(q, ctx, minimal_mode(ctx.profile), "no_think");
}

StrategyOutcome run_budget_aware(const Query& q, const StrategyContext& ctx, EffortLevel level) {
  std::string name = "budget_aware_" + std::string(to_string(level));
  if (ctx.profile.family != InterfaceFamily::discrete_effort) {
    OutcomeBuilder out(q.id, name);
    out.fail("capability", "budget-aware effort tiers need a discrete-effort profile; '" + ctx.profile.name +
                               "' is " + std::string(to_string(ctx.profile.family)));
    return std::move(out).build();
  }
  return run_fixed_mode(q, ctx, ThinkingMode::effort(level), std::move(name));
}

StrategyOutcome run_prompt_tuning(const Query& q, const StrategyContext& ctx) {
  OutcomeBuilder out(q.id, "prompt_tuning");
  try {
    const auto mode = full_think_mode(ctx.profile);
    auto system = strategy_system_prompt("pt", ctx.profile.family, ctx.prompts);
    auto trace = ctx.backend.complete(base_request(ctx, mode, std::move(system), render_pt_user_message(q, ctx.prompts)));
    const auto label = classify_mode(trace.thinking_tokens);
    out.log("mode_label", json{{"label", to_string(label)},
                               {"thinking_tokens", trace.thinking_tokens},
                               {"split", to_string(trace.split)}});
    out.add_pass("solve", mode, std::move(trace));
  } catch (const std::exception& e) {
    record_failure(out, e);
  }
  return std::move(out).build();
}

StrategyOutcome run_routing(const Query& q, const StrategyContext& ctx) {
  OutcomeBuilder out(q.id, "routing");
  try {
    const auto judge_mode = minimal_mode(ctx.profile);
    auto judge_msgs = render_judge_messages(q, ctx.profile.family, ctx.prompts);
    auto judge_req = base_request(ctx, judge_mode, std::move(judge_msgs.system), std::move(judge_msgs.user));
    judge_req.max_output_tokens = ctx.settings.judge_max_tokens;
    auto judge_trace = ctx.backend.complete(judge_req);
    auto decision = parse_judge_decision(judge_trace.answer_text, ctx.profile.family, ctx.profile);
    out.add_pass("judge", judge_mode, std::move(judge_trace));
    out.log("routing", json{{"mode", decision.mode.label()},
                            {"source", to_string(decision.source)},
                            {"reason", decision.reason}});

    auto solve_req = base_request(ctx, decision.mode, ctx.prompts.routing_solve_system,
                                  render_user_message(q, ctx.prompts));
    out.add_pass("solve", decision.mode, ctx.backend.complete(solve_req));
  } catch (const std::exception& e) {
    record_failure(out, e);
  }
  return std::move(out).build();
}

namespace {

std::string full_output(const ResponseTrace& t) {
  if (t.thinking_text.empty()) return t.answer_text;
  return t.thinking_text + "\n" + t.answer_text;
}

}  // namespace

StrategyOutcome run_spec_trigger(const Query& q, const StrategyContext& ctx) {
  OutcomeBuilder out(q.id, "spec_trigger");
  try {
    const auto user = render_user_message(q, ctx.prompts);
    const auto fast_mode = minimal_mode(ctx.profile);
    auto fast = ctx.backend.complete(base_request(ctx, fast_mode, std::nullopt, user));
    auto matches = scan_triggers(full_output(fast), ctx.lexicon);
    const bool escalate = !matches.empty();
    out.add_pass("fast", fast_mode, std::move(fast));
    out.log("trigger_scan", json{{"matches", matches}, {"escalate", escalate}});
    if (escalate) {
      const auto deep = full_think_mode(ctx.profile);
      out.add_pass("escalation", deep, ctx.backend.complete(base_request(ctx, deep, std::nullopt, user)));
    }
  } catch (const std::exception& e) {
    record_failure(out, e);
  }
  return std::move(out).build();
}

StrategyOutcome run_spec_entropy(const Query& q, const StrategyContext& ctx) {
  return run_spec_entropy(q, ctx, ctx.rule, "spec_entropy");
}

StrategyOutcome run_spec_entropy(const Query& q, const StrategyContext& ctx, const EscalationRule& rule,
                                 std::string strategy_name) {
  OutcomeBuilder out(q.id, std::move(strategy_name));
  try {
    rule.validate();
    const auto user = render_user_message(q, ctx.prompts);
    const auto fast_mode = minimal_mode(ctx.profile);
    auto req = base_request(ctx, fast_mode, std::nullopt, user);
    req.want_logprobs = true;
    req.logprob_k = static_cast<std::uint32_t>(rule.k);
    auto fast = ctx.backend.complete(req);
    if (!fast.per_token_logprobs) {
      out.add_pass("fast", fast_mode, std::move(fast));
      throw GatewayError(GatewayErrorKind::capability, "endpoint returned no logprobs for the entropy pass");
    }
    const auto entropies = token_entropies(*fast.per_token_logprobs, rule.k);
    const auto stats = escalation_stats(entropies, rule);
    out.add_pass("fast", fast_mode, std::move(fast));
    out.log("entropy", json{{"tokens", stats.tokens},
                            {"above_threshold", stats.above_threshold},
                            {"fraction", stats.fraction},
                            {"threshold", rule.threshold},
                            {"escalate", stats.escalate}});
    if (stats.escalate) {
      const auto deep = full_think_mode(ctx.profile);
      out.add_pass("escalation", deep, ctx.backend.complete(base_request(ctx, deep, std::nullopt, user)));
    }
  } catch (const std::exception& e) {
    record_failure(out, e);
  }
  return std::move(out).build();
}

}  // namespace thinkswitch
