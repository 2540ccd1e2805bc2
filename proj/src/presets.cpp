#include "thinkswitch/presets.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "thinkswitch/answers.hpp"

namespace thinkswitch {

using nlohmann::json;

void to_json(json& j, const PresetConfig& p) {
  j = json{{"name", p.name}, {"base_strategy", p.base_strategy}, {"params", p.params}};
}

void from_json(const json& j, PresetConfig& p) {
  p.name = j.at("name").get<std::string>();
  p.base_strategy = j.at("base_strategy").get<std::string>();
  p.params = j.value("params", json::object());
  if (!p.params.is_object()) throw SchemaError("preset '" + p.name + "': params must be an object");
}

namespace {

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

}  // namespace

UnknownStrategyError::UnknownStrategyError(const std::string& name, const std::vector<std::string>& known)
    : std::invalid_argument("unknown strategy '" + name + "'; known: " + join(known)) {}

PresetRegistry PresetRegistry::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError("cannot open preset file " + file.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) throw SchemaError(file.string() + ": expected a JSON array of presets");
  PresetRegistry reg;
  for (const auto& entry : doc) {
    try {
      reg.add(entry.get<PresetConfig>());
    } catch (const json::exception& e) {
      throw SchemaError(file.string() + ": " + e.what());
    }
  }
  return reg;
}

void PresetRegistry::add(PresetConfig preset) {
  auto it = std::find_if(presets_.begin(), presets_.end(), [&](const auto& p) { return p.name == preset.name; });
  if (it != presets_.end()) {
    *it = std::move(preset);
  } else {
    presets_.push_back(std::move(preset));
  }
}

bool PresetRegistry::contains(std::string_view name) const {
  return std::any_of(presets_.begin(), presets_.end(), [&](const auto& p) { return p.name == name; });
}

const PresetConfig& PresetRegistry::get(std::string_view name) const {
  for (const auto& p : presets_) {
    if (p.name == name) return p;
  }
  throw UnknownStrategyError(std::string(name), names());
}

std::vector<std::string> PresetRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& p : presets_) out.push_back(p.name);
  return out;
}

// ---------------------------------------------------------------------------
// Selection helpers
// ---------------------------------------------------------------------------

double modal_agreement(const std::vector<RascSample>& samples) {
  if (samples.empty()) return 0.0;
  std::map<std::string, std::size_t> counts;
  std::size_t best = 0;
  for (const auto& s : samples) best = std::max(best, ++counts[s.answer_key]);
  return static_cast<double>(best) / static_cast<double>(samples.size());
}

std::size_t rasc_select(const std::vector<RascSample>& samples, const RascWeights& weights) {
  if (samples.empty()) throw std::invalid_argument("rasc_select: no samples");
  std::map<std::string, std::size_t> counts;
  TokenCount min_tokens = samples.front().tokens;
  for (const auto& s : samples) {
    ++counts[s.answer_key];
    min_tokens = std::min(min_tokens, s.tokens);
  }
  const double n = static_cast<double>(samples.size());
  std::size_t winner = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double consistency = static_cast<double>(counts[samples[i].answer_key]) / n;
    const double brevity =
        samples[i].tokens == 0 ? 1.0 : static_cast<double>(min_tokens) / static_cast<double>(samples[i].tokens);
    const double score = weights.consistency * consistency + weights.brevity * brevity;
    if (score > best) {
      best = score;
      winner = i;
    }
  }
  return winner;
}

std::optional<EarlyExit> find_early_exit(const std::vector<TokenLogprobs>& tokens, std::size_t thinking_tokens,
                                         const DeerParams& params) {
  const std::size_t limit = std::min(thinking_tokens, tokens.size());
  std::vector<std::size_t> offsets(limit + 1, 0);
  std::string text;
  for (std::size_t i = 0; i < limit; ++i) {
    offsets[i] = text.size();
    text += tokens[i].token;
  }
  offsets[limit] = text.size();

  for (std::size_t i = std::max<std::size_t>(params.min_thinking_tokens, 1); i < limit; ++i) {
    std::string_view rest = std::string_view(text).substr(offsets[i]);
    for (const auto& pattern : params.patterns) {
      std::string_view probe = rest;
      if (pattern.front() != '\n') {
        while (!probe.empty() && probe.front() == ' ') probe.remove_prefix(1);
      }
      if (probe.substr(0, pattern.size()) != pattern) continue;
      const std::size_t begin = i > params.window ? i - params.window : 0;
      const double confidence = mean_top1_probability(tokens, begin, i);
      if (confidence >= params.confidence_threshold) {
        return EarlyExit{i, offsets[i], pattern, confidence};
      }
      break;
    }
  }
  return std::nullopt;
}

int hdflow_score(std::string_view problem, const json& params) {
  std::string lower(problem);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });

  std::size_t words = 0;
  bool in_word = false;
  std::size_t symbols = 0;
  for (char c : problem) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
    if (std::string_view("=+-*/^\\$<>_{}").find(c) != std::string_view::npos) ++symbols;
  }

  int score = 0;
  if (words > params.value("long_problem_words", 120u)) ++score;
  if (!problem.empty() &&
      static_cast<double>(symbols) / static_cast<double>(problem.size()) > params.value("symbol_density", 0.08)) {
    ++score;
  }
  int hits = 0;
  for (const auto& kw : params.value("keywords", json::array())) {
    if (lower.find(kw.get<std::string>()) != std::string::npos) ++hits;
  }
  return score + std::min(hits, 2);
}

// ---------------------------------------------------------------------------
// Executors
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void capability(const std::string& message) {
  throw GatewayError(GatewayErrorKind::capability, message);
}

std::string budget_text(TokenCount b) { return std::to_string(b); }

StrategyOutcome run_s1(const Query& q, const StrategyContext& ctx, const PresetConfig& p, OutcomeBuilder& out) {
  const auto budget = p.params.at("thinking_budget").get<TokenCount>();
  ThinkingMode mode;
  switch (ctx.profile.family) {
    case InterfaceFamily::binary_switch:
      if (!ctx.profile.accepts_thinking_budget) capability("profile '" + ctx.profile.name + "' takes no thinking budget");
      mode = ThinkingMode::think_with_budget(budget);
      break;
    case InterfaceFamily::numeric_budget:
      mode = ThinkingMode::budget(budget);
      break;
    case InterfaceFamily::discrete_effort:
      capability("budget forcing needs a thinking-budget parameter; '" + ctx.profile.name + "' only has effort tiers");
  }
  out.add_pass("solve", mode, ctx.backend.complete(base_request(ctx, mode, std::nullopt, render_user_message(q, ctx.prompts))));
  return std::move(out).build();
}

StrategyOutcome run_tale(const Query& q, const StrategyContext& ctx, const PresetConfig& p, OutcomeBuilder& out) {
  const auto& budgets = p.params.at("budgets");
  const auto fallback = p.params.value("fallback", std::string("hard"));

  const auto estimate_mode = minimal_mode(ctx.profile);
  auto req = base_request(ctx, estimate_mode, ctx.prompts.preset("tale_estimate_system"),
                          substitute(ctx.prompts.preset("tale_estimate_user"), {{"problem", q.problem}}));
  req.max_output_tokens = ctx.settings.judge_max_tokens;
  auto estimate = ctx.backend.complete(req);

  std::string difficulty = fallback;
  std::string source = "fallback";
  if (auto block = extract_json_block(estimate.answer_text)) {
    json obj = json::parse(block->begin(), block->end(), nullptr, false);
    if (obj.is_object() && obj.contains("difficulty") && obj["difficulty"].is_string() &&
        budgets.contains(obj["difficulty"].get<std::string>())) {
      difficulty = obj["difficulty"].get<std::string>();
      source = "parsed";
    }
  }
  const auto budget = budgets.at(difficulty).get<TokenCount>();
  out.add_pass("estimate", estimate_mode, std::move(estimate));
  out.log("tale_estimate", json{{"difficulty", difficulty}, {"budget", budget}, {"source", source}});

  const auto mode = full_think_mode(ctx.profile);
  auto system = substitute(ctx.prompts.preset("tale_solve_system"), {{"budget", budget_text(budget)}});
  out.add_pass("solve", mode, ctx.backend.complete(base_request(ctx, mode, std::move(system), render_user_message(q, ctx.prompts))));
  return std::move(out).build();
}

StrategyOutcome run_budget_guidance(const Query& q, const StrategyContext& ctx, const PresetConfig& p,
                                    OutcomeBuilder& out) {
  const auto budget = p.params.at("budget").get<TokenCount>();
  ThinkingMode mode = full_think_mode(ctx.profile);
  if (p.params.value("soft_thinking_budget", false) && ctx.profile.family == InterfaceFamily::binary_switch &&
      ctx.profile.accepts_thinking_budget) {
    mode = ThinkingMode::think_with_budget(budget);
  }
  auto system = substitute(ctx.prompts.preset("budget_guidance_system"), {{"budget", budget_text(budget)}});
  out.add_pass("solve", mode, ctx.backend.complete(base_request(ctx, mode, std::move(system), render_user_message(q, ctx.prompts))));
  return std::move(out).build();
}

StrategyOutcome run_prompted_no_think(const Query& q, const StrategyContext& ctx, std::string_view prefix,
                                      OutcomeBuilder& out) {
  const auto mode = minimal_mode(ctx.profile);
  auto system = ctx.prompts.preset(std::string(prefix) + "." + std::string(to_string(q.domain)));
  out.add_pass("solve", mode, ctx.backend.complete(base_request(ctx, mode, std::move(system), render_user_message(q, ctx.prompts))));
  return std::move(out).build();
}

StrategyOutcome run_dynathink(const Query& q, const StrategyContext& ctx, const PresetConfig& p, OutcomeBuilder& out) {
  const double threshold = p.params.value("confidence_threshold", 0.7);
  const auto user = render_user_message(q, ctx.prompts);
  const auto fast_mode = minimal_mode(ctx.profile);
  auto req = base_request(ctx, fast_mode, std::nullopt, user);
  req.want_logprobs = true;
  req.logprob_k = p.params.value("logprob_k", 20u);
  auto fast = ctx.backend.complete(req);
  if (!fast.per_token_logprobs) {
    out.add_pass("fast", fast_mode, std::move(fast));
    capability("endpoint returned no logprobs for the confidence probe");
  }
  const auto& lp = *fast.per_token_logprobs;
  const double confidence = lp.empty() ? 1.0 : mean_top1_probability(lp, 0, lp.size());
  const bool regenerate = confidence < threshold;
  out.add_pass("fast", fast_mode, std::move(fast));
  out.log("confidence", json{{"statistic", "mean_top1_probability"},
                             {"value", confidence},
                             {"threshold", threshold},
                             {"escalate", regenerate}});
  if (regenerate) {
    const auto deep = full_think_mode(ctx.profile);
    out.add_pass("escalation", deep, ctx.backend.complete(base_request(ctx, deep, std::nullopt, user)));
  }
  return std::move(out).build();
}

StrategyOutcome run_deer(const Query& q, const StrategyContext& ctx, const PresetConfig& p, OutcomeBuilder& out) {
  DeerParams params;
  params.confidence_threshold = p.params.value("confidence_threshold", 0.85);
  params.min_thinking_tokens = p.params.value("min_thinking_tokens", 50u);
  params.window = p.params.value("window", 16u);
  params.patterns = p.params.at("patterns").get<std::vector<std::string>>();
  params.patterns.erase(std::remove(params.patterns.begin(), params.patterns.end(), std::string()),
                        params.patterns.end());

  const auto user = render_user_message(q, ctx.prompts);
  const auto think_mode = full_think_mode(ctx.profile);
  auto req = base_request(ctx, think_mode, std::nullopt, user);
  req.want_logprobs = true;
  req.logprob_k = p.params.value("logprob_k", 10u);
  auto think = ctx.backend.complete(req);
  if (!think.per_token_logprobs) {
    out.add_pass("think", think_mode, std::move(think));
    capability("endpoint returned no logprobs for early-exit monitoring");
  }

  auto exit = find_early_exit(*think.per_token_logprobs, think.thinking_tokens, params);
  if (!exit) {
    out.log("early_exit", json{{"exited", false}});
    out.add_pass("think", think_mode, std::move(think));
    return std::move(out).build();
  }

  std::string reasoning;
  for (std::size_t i = 0; i < exit->token_index; ++i) reasoning += (*think.per_token_logprobs)[i].token;
  out.log("early_exit", json{{"exited", true},
                             {"token_index", exit->token_index},
                             {"pattern", exit->pattern},
                             {"confidence", exit->confidence},
                             {"generated_tokens", think.total_tokens}});
  ResponseTrace truncated;
  truncated.thinking_text = reasoning;
  truncated.thinking_tokens = exit->token_index;
  truncated.total_tokens = exit->token_index;
  truncated.split = think.split;
  truncated.finish_reason = "early_exit";
  truncated.per_token_logprobs.emplace(think.per_token_logprobs->begin(),
                                       think.per_token_logprobs->begin() + static_cast<std::ptrdiff_t>(exit->token_index));
  out.add_pass("think", think_mode, std::move(truncated));

  const auto answer_mode = minimal_mode(ctx.profile);
  auto answer_user =
      substitute(ctx.prompts.preset("deer_answer_user"), {{"user_message", user}, {"reasoning", reasoning}});
  out.add_pass("answer", answer_mode, ctx.backend.complete(base_request(ctx, answer_mode, std::nullopt, std::move(answer_user))));
  return std::move(out).build();
}

StrategyOutcome run_rasc(const Query& q, const StrategyContext& ctx, const PresetConfig& p, OutcomeBuilder& out) {
  const auto max_samples = p.params.value("max_samples", 8u);
  const auto min_samples = p.params.value("min_samples", 3u);
  const double agreement = p.params.value("consistency_threshold", 0.6);
  const RascWeights weights{p.params.value("consistency_weight", 0.7), p.params.value("brevity_weight", 0.3)};
  const double temperature = p.params.value("temperature", 0.7);
  const std::uint64_t base_seed = ctx.settings.seed.value_or(0);

  const auto user = render_user_message(q, ctx.prompts);
  const auto mode = full_think_mode(ctx.profile);
  std::vector<RascSample> samples;
  bool early = false;
  for (std::uint64_t i = 0; i < max_samples; ++i) {
    auto req = base_request(ctx, mode, std::nullopt, user);
    req.temperature = temperature;
    req.seed = base_seed + i;
    auto trace = ctx.backend.complete(req);
    samples.push_back(RascSample{answer_key(trace.answer_text, q.domain), trace.total_tokens});
    out.add_pass("sample", mode, std::move(trace));
    if (samples.size() >= min_samples && modal_agreement(samples) >= agreement) {
      early = samples.size() < max_samples;
      break;
    }
  }
  const auto winner = rasc_select(samples, weights);
  out.select_pass(winner);
  out.log("self_consistency", json{{"samples", samples.size()},
                                   {"agreement", modal_agreement(samples)},
                                   {"early_stop", early},
                                   {"selected", winner}});
  return std::move(out).build();
}

StrategyOutcome run_hdflow(const Query& q, const StrategyContext& ctx, const PresetConfig& p, OutcomeBuilder& out) {
  const int score = hdflow_score(q.problem, p.params);
  const bool think = score >= p.params.value("think_threshold", 2);
  const auto mode = think ? full_think_mode(ctx.profile) : minimal_mode(ctx.profile);
  out.log("routing", json{{"mode", mode.label()}, {"source", "heuristic"}, {"score", score}});
  out.add_pass("solve", mode, ctx.backend.complete(base_request(ctx, mode, std::nullopt, render_user_message(q, ctx.prompts))));
  return std::move(out).build();
}

StrategyOutcome run_preset_entropy(const Query& q, const StrategyContext& ctx, const PresetConfig& p) {
  EscalationRule rule = ctx.rule;
  if (p.params.contains("threshold") && !p.params["threshold"].is_null()) rule.threshold = p.params["threshold"].get<double>();
  rule.min_count = p.params.value("min_count", rule.min_count);
  rule.min_fraction = p.params.value("min_fraction", rule.min_fraction);
  rule.k = p.params.value("k", rule.k);
  return run_spec_entropy(q, ctx, rule, p.name);
}

}  // namespace

StrategyOutcome run_preset(const Query& q, const StrategyContext& ctx, const PresetConfig& preset) {
  static const std::vector<std::string> kBases{"s1",  "tale",      "budget_guidance", "sot",    "cod",
                                               "dynathink", "deer", "rasc",            "hdflow", "spec_entropy"};
  const auto& base = preset.base_strategy;
  if (std::find(kBases.begin(), kBases.end(), base) == kBases.end()) throw UnknownStrategyError(base, kBases);
  if (base == "spec_entropy") return run_preset_entropy(q, ctx, preset);

  OutcomeBuilder out(q.id, preset.name);
  try {
    if (base == "s1") return run_s1(q, ctx, preset, out);
    if (base == "tale") return run_tale(q, ctx, preset, out);
    if (base == "budget_guidance") return run_budget_guidance(q, ctx, preset, out);
    if (base == "sot") return run_prompted_no_think(q, ctx, "sot_system", out);
    if (base == "cod") return run_prompted_no_think(q, ctx, "cod_system", out);
    if (base == "dynathink") return run_dynathink(q, ctx, preset, out);
    if (base == "deer") return run_deer(q, ctx, preset, out);
    if (base == "rasc") return run_rasc(q, ctx, preset, out);
    return run_hdflow(q, ctx, preset, out);
  } catch (const json::exception& e) {
    out.fail("config", "preset '" + preset.name + "': " + e.what());
  } catch (const std::exception& e) {
    record_failure(out, e);
  }
  return std::move(out).build();
}

const std::vector<std::string>& builtin_strategy_names() {
  static const std::vector<std::string> kNames{"full_think",         "no_think",          "budget_aware_low",
                                               "budget_aware_medium", "budget_aware_high", "prompt_tuning",
                                               "routing",             "spec_trigger",      "spec_entropy"};
  return kNames;
}

std::vector<std::string> strategy_names(const PresetRegistry& presets) {
  auto names = builtin_strategy_names();
  for (auto& n : presets.names()) {
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(std::move(n));
  }
  return names;
}

bool is_known_strategy(std::string_view name, const PresetRegistry& presets) {
  const auto& b = builtin_strategy_names();
  return std::find(b.begin(), b.end(), name) != b.end() || presets.contains(name);
}

StrategyOutcome run_strategy(std::string_view name, const Query& q, const StrategyContext& ctx,
                             const PresetRegistry& presets) {
  if (name == "full_think") return run_full_think(q, ctx);
  if (name == "no_think") return run_no_think(q, ctx);
  if (name == "budget_aware_low") return run_budget_aware(q, ctx, EffortLevel::low);
  if (name == "budget_aware_medium") return run_budget_aware(q, ctx, EffortLevel::medium);
  if (name == "budget_aware_high") return run_budget_aware(q, ctx, EffortLevel::high);
  if (name == "prompt_tuning") return run_prompt_tuning(q, ctx);
  if (name == "routing") return run_routing(q, ctx);
  if (name == "spec_trigger") return run_spec_trigger(q, ctx);
  if (name == "spec_entropy") return run_spec_entropy(q, ctx);
  if (presets.contains(name)) return run_preset(q, ctx, presets.get(name));
  throw UnknownStrategyError(std::string(name), strategy_names(presets));
}

}  // namespace thinkswitch
