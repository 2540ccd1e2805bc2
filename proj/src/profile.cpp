#include "thinkswitch/profile.hpp"

#include <cstdlib>
#include <fstream>

namespace thinkswitch {

using nlohmann::json;

std::string_view to_string(InterfaceFamily f) {
  switch (f) {
    case InterfaceFamily::binary_switch: return "binary-switch";
    case InterfaceFamily::discrete_effort: return "discrete-effort";
    case InterfaceFamily::numeric_budget: return "numeric-budget";
  }
  return "unknown";
}

InterfaceFamily parse_family(std::string_view text) {
  if (text == "binary-switch") return InterfaceFamily::binary_switch;
  if (text == "discrete-effort") return InterfaceFamily::discrete_effort;
  if (text == "numeric-budget") return InterfaceFamily::numeric_budget;
  throw SchemaError("unknown interface family '" + std::string(text) + "'");
}

ModeKind mode_kind_of(InterfaceFamily f) {
  switch (f) {
    case InterfaceFamily::binary_switch: return ModeKind::binary;
    case InterfaceFamily::discrete_effort: return ModeKind::effort;
    case InterfaceFamily::numeric_budget: return ModeKind::budget;
  }
  return ModeKind::binary;
}

void to_json(json& j, const ModelProfile& p) {
  j = json{{"name", p.name},
           {"family", to_string(p.family)},
           {"model_name", p.model_name},
           {"entropy_threshold", p.entropy_threshold},
           {"logprob_k", p.logprob_k},
           {"trigger_lexicon_id", p.trigger_lexicon_id},
           {"prompt_set_id", p.prompt_set_id},
           {"max_output_tokens", p.max_output_tokens},
           {"think_open", p.think_open},
           {"think_close", p.think_close},
           {"accepts_thinking_budget", p.accepts_thinking_budget},
           {"thinking_switch_field", p.thinking_switch_field},
           {"effort_field", p.effort_field},
           {"budget_field", p.budget_field},
           {"extra_trigger_keywords", p.extra_trigger_keywords}};
}

void from_json(const json& j, ModelProfile& p) {
  ModelProfile d;
  p.name = j.at("name").get<std::string>();
  p.family = parse_family(j.at("family").get<std::string>());
  p.model_name = j.value("model_name", p.name);
  p.entropy_threshold = j.value("entropy_threshold", d.entropy_threshold);
  p.logprob_k = j.value("logprob_k", d.logprob_k);
  p.trigger_lexicon_id = j.value("trigger_lexicon_id", d.trigger_lexicon_id);
  p.prompt_set_id = j.value("prompt_set_id", d.prompt_set_id);
  p.max_output_tokens = j.value("max_output_tokens", d.max_output_tokens);
  p.think_open = j.value("think_open", d.think_open);
  p.think_close = j.value("think_close", d.think_close);
  p.accepts_thinking_budget = j.value("accepts_thinking_budget", d.accepts_thinking_budget);
  p.thinking_switch_field = j.value("thinking_switch_field", d.thinking_switch_field);
  p.effort_field = j.value("effort_field", d.effort_field);
  p.budget_field = j.value("budget_field", d.budget_field);
  p.extra_trigger_keywords = j.value("extra_trigger_keywords", std::vector<std::string>{});

  if (!(p.entropy_threshold > 0.0 && p.entropy_threshold < 1.0)) {
    throw SchemaError("profile " + p.name + ": entropy_threshold must lie in (0, 1)");
  }
  if (p.logprob_k == 0) throw SchemaError("profile " + p.name + ": logprob_k must be positive");
  if (p.max_output_tokens == 0 || p.max_output_tokens > 32768) {
    throw SchemaError("profile " + p.name + ": max_output_tokens must lie in [1, 32768]");
  }
}

ThinkingMode full_think_mode(const ModelProfile& p) {
  switch (p.family) {
    case InterfaceFamily::binary_switch: return ThinkingMode::think();
    case InterfaceFamily::discrete_effort: return ThinkingMode::effort(EffortLevel::high);
    case InterfaceFamily::numeric_budget: return ThinkingMode::budget(p.max_output_tokens);
  }
  return ThinkingMode::think();
}

ThinkingMode minimal_mode(const ModelProfile& p) {
  switch (p.family) {
    case InterfaceFamily::binary_switch: return ThinkingMode::no_think();
    case InterfaceFamily::discrete_effort: return ThinkingMode::effort(EffortLevel::low);
    case InterfaceFamily::numeric_budget: return ThinkingMode::budget(0);
  }
  return ThinkingMode::no_think();
}

std::vector<ThinkingMode> native_modes(const ModelProfile& p) {
  switch (p.family) {
    case InterfaceFamily::binary_switch:
      return {ThinkingMode::think(), ThinkingMode::no_think()};
    case InterfaceFamily::discrete_effort:
      return {ThinkingMode::effort(EffortLevel::high), ThinkingMode::effort(EffortLevel::medium),
              ThinkingMode::effort(EffortLevel::low)};
    case InterfaceFamily::numeric_budget: {
      std::vector<ThinkingMode> modes{ThinkingMode::budget(p.max_output_tokens)};
      for (TokenCount b : {4096u, 2048u, 1024u, 512u}) {
        if (b < p.max_output_tokens) modes.push_back(ThinkingMode::budget(b));
      }
      modes.push_back(ThinkingMode::budget(0));
      return modes;
    }
  }
  return {};
}

ModelProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open profile " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw SchemaError("profile " + path.string() + " is not valid JSON");
  try {
    return j.get<ModelProfile>();
  } catch (const json::exception& e) {
    throw SchemaError("profile " + path.string() + ": " + e.what());
  }
}

ProfileRegistry ProfileRegistry::load_dir(const std::filesystem::path& dir) {
  ProfileRegistry reg;
  if (!std::filesystem::is_directory(dir)) throw SchemaError("profile directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") reg.add(load_profile(entry.path()));
  }
  return reg;
}

void ProfileRegistry::add(ModelProfile p) {
  auto name = p.name;
  profiles_.insert_or_assign(std::move(name), std::move(p));
}

const ModelProfile& ProfileRegistry::get(std::string_view name) const {
  auto it = profiles_.find(name);
  if (it == profiles_.end()) {
    std::string known;
    for (const auto& [k, _] : profiles_) known += (known.empty() ? "" : ", ") + k;
    throw SchemaError("unknown profile '" + std::string(name) + "' (known: " + known + ")");
  }
  return it->second;
}

bool ProfileRegistry::contains(std::string_view name) const { return profiles_.find(name) != profiles_.end(); }

std::vector<std::string> ProfileRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : profiles_) out.push_back(k);
  return out;
}

std::filesystem::path default_asset_dir() {
  if (const char* env = std::getenv("THINKSWITCH_ASSETS"); env && *env) return env;
#ifdef THINKSWITCH_ASSET_DIR
  return THINKSWITCH_ASSET_DIR;
#else
  return "assets";
#endif
}

}  // namespace thinkswitch
