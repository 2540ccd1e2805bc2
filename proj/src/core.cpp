#include "thinkswitch/core.hpp"

#include <charconv>

#include "thinkswitch/profile.hpp"

namespace thinkswitch {

using nlohmann::json;

std::string_view to_string(ModeKind kind) {
  switch (kind) {
    case ModeKind::binary: return "binary";
    case ModeKind::effort: return "effort";
    case ModeKind::budget: return "budget";
  }
  return "unknown";
}

std::string_view to_string(EffortLevel level) {
  switch (level) {
    case EffortLevel::low: return "low";
    case EffortLevel::medium: return "medium";
    case EffortLevel::high: return "high";
  }
  return "unknown";
}

std::optional<EffortLevel> parse_effort(std::string_view text) {
  if (text == "low") return EffortLevel::low;
  if (text == "medium") return EffortLevel::medium;
  if (text == "high") return EffortLevel::high;
  return std::nullopt;
}

namespace {

TokenCount parse_count(std::string_view text, std::string_view what) {
  TokenCount value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw SchemaError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string ThinkingMode::label() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BinaryMode>) {
          if (!m.think) return "no_think";
          if (m.budget) return "think@" + std::to_string(*m.budget);
          return "think";
        } else if constexpr (std::is_same_v<T, EffortMode>) {
          return "effort:" + std::string(to_string(m.level));
        } else {
          return "budget:" + std::to_string(m.tokens);
        }
      },
      value_);
}

ThinkingMode ThinkingMode::parse_label(std::string_view label) {
  if (label == "think") return think();
  if (label == "no_think") return no_think();
  if (label.starts_with("think@")) return think_with_budget(parse_count(label.substr(6), "budget"));
  if (label.starts_with("effort:")) {
    if (auto l = parse_effort(label.substr(7))) return effort(*l);
    throw SchemaError("unknown effort level in mode '" + std::string(label) + "'");
  }
  if (label.starts_with("budget:")) return budget(parse_count(label.substr(7), "budget"));
  throw SchemaError("unrecognised thinking mode '" + std::string(label) + "'");
}

void to_json(json& j, const ThinkingMode& mode) {
  j = json::object();
  j["kind"] = to_string(mode.kind());
  if (auto b = mode.get_if<BinaryMode>()) {
    j["think"] = b->think;
    if (b->budget) j["budget"] = *b->budget;
  } else if (auto e = mode.get_if<EffortMode>()) {
    j["level"] = to_string(e->level);
  } else if (auto n = mode.get_if<BudgetMode>()) {
    j["budget"] = n->tokens;
  }
}

void from_json(const json& j, ThinkingMode& mode) {
  if (!j.is_object() || !j.contains("kind")) throw SchemaError("thinking mode must be an object with 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "binary") {
    BinaryMode b;
    b.think = j.at("think").get<bool>();
    if (j.contains("budget") && !j.at("budget").is_null()) b.budget = j.at("budget").get<TokenCount>();
    mode = b;
  } else if (kind == "effort") {
    auto level = parse_effort(j.at("level").get<std::string>());
    if (!level) throw SchemaError("unknown effort level");
    mode = EffortMode{*level};
  } else if (kind == "budget") {
    mode = BudgetMode{j.at("budget").get<TokenCount>()};
  } else {
    throw SchemaError("unknown mode kind '" + kind + "'");
  }
}

bool validate_mode(const ThinkingMode& mode, const ModelProfile& profile) {
  if (mode.kind() != mode_kind_of(profile.family)) return false;
  if (auto b = mode.get_if<BinaryMode>()) {
    if (!b->budget) return true;
    return b->think && *b->budget <= profile.max_output_tokens;
  }
  if (auto n = mode.get_if<BudgetMode>()) return n->tokens <= profile.max_output_tokens;
  return true;
}

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::math: return "math";
    case Domain::science: return "science";
    case Domain::code: return "code";
  }
  return "unknown";
}

std::optional<Domain> parse_domain(std::string_view text) {
  if (text == "math") return Domain::math;
  if (text == "science") return Domain::science;
  if (text == "code") return Domain::code;
  return std::nullopt;
}

std::string_view to_string(TokenSplit s) {
  switch (s) {
    case TokenSplit::reported: return "reported";
    case TokenSplit::estimated: return "estimated";
    case TokenSplit::unavailable: return "unavailable";
  }
  return "unknown";
}

std::string_view to_string(ModeLabel label) {
  switch (label) {
    case ModeLabel::nothink: return "nothink";
    case ModeLabel::brief_think: return "brief_think";
    case ModeLabel::think: return "think";
  }
  return "unknown";
}

namespace {

TokenSplit parse_split(const std::string& s) {
  if (s == "reported") return TokenSplit::reported;
  if (s == "estimated") return TokenSplit::estimated;
  if (s == "unavailable") return TokenSplit::unavailable;
  throw SchemaError("unknown token split '" + s + "'");
}

}  // namespace

void to_json(json& j, const ResponseTrace& t) {
  j = json{{"thinking_text", t.thinking_text},
           {"answer_text", t.answer_text},
           {"thinking_tokens", t.thinking_tokens},
           {"answer_tokens", t.answer_tokens},
           {"total_tokens", t.total_tokens},
           {"split", to_string(t.split)},
           {"finish_reason", t.finish_reason}};
  if (t.per_token_logprobs) {
    json tokens = json::array();
    for (const auto& tok : *t.per_token_logprobs) {
      json top = json::array();
      for (const auto& c : tok.top) top.push_back(json::array({c.token, c.logprob}));
      tokens.push_back(json{{"token", tok.token}, {"logprob", tok.logprob}, {"top", std::move(top)}});
    }
    j["logprobs"] = std::move(tokens);
  }
}

void from_json(const json& j, ResponseTrace& t) {
  t.thinking_text = j.at("thinking_text").get<std::string>();
  t.answer_text = j.at("answer_text").get<std::string>();
  t.thinking_tokens = j.at("thinking_tokens").get<TokenCount>();
  t.answer_tokens = j.at("answer_tokens").get<TokenCount>();
  t.total_tokens = j.at("total_tokens").get<TokenCount>();
  t.split = parse_split(j.at("split").get<std::string>());
  t.finish_reason = j.value("finish_reason", std::string{});
  t.per_token_logprobs.reset();
  if (j.contains("logprobs")) {
    std::vector<TokenLogprobs> tokens;
    for (const auto& tok : j.at("logprobs")) {
      TokenLogprobs entry{tok.at("token").get<std::string>(), tok.at("logprob").get<double>(), {}};
      for (const auto& c : tok.at("top")) {
        entry.top.push_back({c.at(0).get<std::string>(), c.at(1).get<double>()});
      }
      tokens.push_back(std::move(entry));
    }
    t.per_token_logprobs = std::move(tokens);
  }
}

const DecisionEvent* StrategyOutcome::find_event(std::string_view kind) const {
  for (const auto& e : decision_log_) {
    if (e.kind == kind) return &e;
  }
  return nullptr;
}

void to_json(json& j, const StrategyOutcome& o) {
  json passes = json::array();
  for (const auto& p : o.passes()) {
    passes.push_back(json{{"role", p.role}, {"mode", p.mode}, {"trace", p.trace}});
  }
  json log = json::array();
  for (const auto& e : o.decision_log()) log.push_back(json{{"kind", e.kind}, {"detail", e.detail}});
  j = json{{"query_id", o.query_id()},
           {"strategy", o.strategy_name()},
           {"passes", std::move(passes)},
           {"decision_log", std::move(log)},
           {"final_answer", o.final_answer()},
           {"total_tokens", o.total_tokens()},
           {"failed", o.failed()}};
  if (o.final_pass()) j["final_pass"] = *o.final_pass();
  if (o.error()) j["error"] = json{{"kind", o.error()->kind}, {"message", o.error()->message}};
}

void from_json(const json& j, StrategyOutcome& o) {
  OutcomeBuilder builder(j.at("query_id").get<std::string>(), j.at("strategy").get<std::string>());
  for (const auto& p : j.at("passes")) {
    builder.add_pass(p.at("role").get<std::string>(), p.at("mode").get<ThinkingMode>(),
                     p.at("trace").get<ResponseTrace>());
  }
  for (const auto& e : j.at("decision_log")) {
    builder.log(e.at("kind").get<std::string>(), e.at("detail"));
  }
  if (j.contains("final_pass")) builder.select_pass(j.at("final_pass").get<std::size_t>());
  if (j.contains("error")) {
    builder.fail(j.at("error").at("kind").get<std::string>(), j.at("error").at("message").get<std::string>());
  }
  o = std::move(builder).build();
  if (o.total_tokens() != j.at("total_tokens").get<TokenCount>()) {
    throw SchemaError("record " + o.query_id() + ": total_tokens does not equal the pass sum");
  }
}

OutcomeBuilder::OutcomeBuilder(std::string query_id, std::string strategy_name) {
  outcome_.query_id_ = std::move(query_id);
  outcome_.strategy_name_ = std::move(strategy_name);
}

OutcomeBuilder& OutcomeBuilder::add_pass(std::string role, ThinkingMode mode, ResponseTrace trace) {
  outcome_.total_tokens_ += trace.total_tokens;
  outcome_.passes_.push_back(Pass{std::move(role), mode, std::move(trace)});
  return *this;
}

OutcomeBuilder& OutcomeBuilder::log(std::string kind, json detail) {
  outcome_.decision_log_.push_back(DecisionEvent{std::move(kind), std::move(detail)});
  return *this;
}

OutcomeBuilder& OutcomeBuilder::select_pass(std::size_t index) {
  if (index >= outcome_.passes_.size()) throw std::out_of_range("selected pass does not exist");
  outcome_.final_pass_ = index;
  return *this;
}

OutcomeBuilder& OutcomeBuilder::fail(std::string kind, std::string message) {
  outcome_.error_ = OutcomeError{std::move(kind), std::move(message)};
  return *this;
}

StrategyOutcome OutcomeBuilder::build() && {
  auto& o = outcome_;
  if (!o.final_pass_ && !o.passes_.empty() && !o.error_) o.final_pass_ = o.passes_.size() - 1;
  o.final_answer_ = o.final_pass_ ? o.passes_[*o.final_pass_].trace.answer_text : std::string{};
  return std::move(o);
}

}  // namespace thinkswitch
