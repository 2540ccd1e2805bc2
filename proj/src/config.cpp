#include "thinkswitch/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace thinkswitch {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

EndpointConfig endpoint_from(const json& j, const std::string& where) {
  if (j.is_string()) {
    EndpointConfig e;
    e.base_url = j.get<std::string>();
    return e;
  }
  reject_unknown(j, {"base_url", "model", "api_key_env", "connect_timeout_ms", "read_timeout_ms", "retry"}, where);
  try {
    return j.get<EndpointConfig>();
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
  if (j.is_string()) return {j.get<std::string>()};
  if (!j.is_array()) throw ConfigError(where + " must be a string or an array of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw ConfigError(where + " must contain strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

}  // namespace

std::filesystem::path RunConfig::asset_dir() const { return assets.empty() ? default_asset_dir() : assets; }

void RunConfig::validate() const {
  if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
  if (strategies.empty()) throw ConfigError("no strategy selected");
  if (baseline.empty()) throw ConfigError("baseline strategy must be named");
  if (profile.empty()) throw ConfigError("profile must be named");
  if (entropy_threshold && !(*entropy_threshold >= 0.0 && *entropy_threshold <= 1.0)) {
    throw ConfigError("escalation.threshold must lie in [0, 1]");
  }
  if (escalation_min_count < 1) throw ConfigError("escalation.min_count must be >= 1");
  if (!(escalation_min_fraction >= 0.0 && escalation_min_fraction <= 1.0)) {
    throw ConfigError("escalation.min_fraction must lie in [0, 1]");
  }
  if (logprob_k && (*logprob_k < 1 || *logprob_k > 20)) throw ConfigError("escalation.k must lie in [1, 20]");
  if (generation.max_output_tokens < 1) throw ConfigError("generation.max_output_tokens must be >= 1");
  if (generation.judge_max_tokens < 1) throw ConfigError("generation.judge_max_tokens must be >= 1");
  if (generation.temperature < 0.0) throw ConfigError("generation.temperature must be >= 0");
  if (external_timeout.count() <= 0) throw ConfigError("external_grader.timeout_ms must be positive");
  if (rft.K < 1) throw ConfigError("rft.K must be >= 1");
  if (rft.group_size < 1) throw ConfigError("rft.group_size must be >= 1");
  if (rft.strategy != "pt" && rft.strategy != "rt" && rft.strategy != "baseline") {
    throw ConfigError("rft.strategy must be one of: pt, rt, baseline");
  }
  for (const auto& f : rft.formats) {
    if (!parse_training_format(f)) throw ConfigError("unknown rft format '" + f + "' (known: sft, dpo, grpo-log)");
  }
  for (const auto& m : rft.modes) {
    try {
      (void)ThinkingMode::parse_label(m);
    } catch (const std::exception& e) {
      throw ConfigError("rft.modes: " + std::string(e.what()));
    }
  }
  RewardParams p{rft.alpha, rft.beta, 1.0, rft.group_size};
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("rft: ") + e.what());
  }
}

RunConfig parse_run_config(const json& j) {
  reject_unknown(j,
                 {"endpoint", "judge_endpoint", "judge_profile", "profile", "strategy", "strategies", "dataset",
                  "datasets", "concurrency", "baseline", "out", "seed", "assets", "profiles_dir", "prompt_dir",
                  "lexicon", "presets", "escalation", "generation", "external_grader", "rft"},
                 "config");
  RunConfig c;
  try {
    if (j.contains("endpoint")) c.endpoint = endpoint_from(j.at("endpoint"), "endpoint");
    if (j.contains("judge_endpoint")) c.judge_endpoint = endpoint_from(j.at("judge_endpoint"), "judge_endpoint");
    c.judge_profile = j.value("judge_profile", c.judge_profile);
    c.profile = j.value("profile", c.profile);
    if (j.contains("strategy") && j.contains("strategies")) throw ConfigError("give 'strategy' or 'strategies', not both");
    if (j.contains("strategy")) c.strategies = string_list(j.at("strategy"), "strategy");
    if (j.contains("strategies")) c.strategies = string_list(j.at("strategies"), "strategies");
    if (j.contains("dataset") && j.contains("datasets")) throw ConfigError("give 'dataset' or 'datasets', not both");
    if (j.contains("dataset")) c.datasets = string_list(j.at("dataset"), "dataset");
    if (j.contains("datasets")) c.datasets = string_list(j.at("datasets"), "datasets");
    if (j.contains("concurrency")) {
      const auto n = j.at("concurrency").get<long long>();
      if (n < 1) throw ConfigError("concurrency must be >= 1");
      c.concurrency = static_cast<std::size_t>(n);
    }
    c.baseline = j.value("baseline", c.baseline);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("assets")) c.assets = j.at("assets").get<std::string>();
    if (j.contains("profiles_dir")) c.profiles_dir = j.at("profiles_dir").get<std::string>();
    if (j.contains("prompt_dir")) c.prompt_dir = j.at("prompt_dir").get<std::string>();
    if (j.contains("lexicon")) c.lexicon_file = j.at("lexicon").get<std::string>();
    if (j.contains("presets")) c.presets_file = j.at("presets").get<std::string>();

    if (j.contains("escalation")) {
      const auto& e = j.at("escalation");
      reject_unknown(e, {"threshold", "min_count", "min_fraction", "k"}, "escalation");
      if (e.contains("threshold") && !e.at("threshold").is_null()) c.entropy_threshold = e.at("threshold").get<double>();
      c.escalation_min_count = e.value("min_count", c.escalation_min_count);
      c.escalation_min_fraction = e.value("min_fraction", c.escalation_min_fraction);
      if (e.contains("k") && !e.at("k").is_null()) c.logprob_k = e.at("k").get<std::size_t>();
    }
    if (j.contains("generation")) {
      const auto& g = j.at("generation");
      reject_unknown(g, {"max_output_tokens", "temperature", "judge_max_tokens"}, "generation");
      c.generation.max_output_tokens = g.value("max_output_tokens", c.generation.max_output_tokens);
      c.generation.temperature = g.value("temperature", c.generation.temperature);
      c.generation.judge_max_tokens = g.value("judge_max_tokens", c.generation.judge_max_tokens);
    }
    if (j.contains("external_grader")) {
      const auto& x = j.at("external_grader");
      reject_unknown(x, {"command", "timeout_ms"}, "external_grader");
      if (x.contains("command") && !x.at("command").is_null()) c.external_command = x.at("command").get<std::string>();
      c.external_timeout = std::chrono::milliseconds(x.value("timeout_ms", c.external_timeout.count()));
    }
    if (j.contains("rft")) {
      const auto& r = j.at("rft");
      reject_unknown(r,
                     {"strategy", "K", "alpha", "beta", "group_size", "fresh_grpo_groups", "temperature", "modes",
                      "formats"},
                     "rft");
      c.rft.strategy = r.value("strategy", c.rft.strategy);
      c.rft.K = r.value("K", c.rft.K);
      c.rft.alpha = r.value("alpha", c.rft.alpha);
      c.rft.beta = r.value("beta", c.rft.beta);
      c.rft.group_size = r.value("group_size", c.rft.group_size);
      c.rft.fresh_grpo_groups = r.value("fresh_grpo_groups", c.rft.fresh_grpo_groups);
      c.rft.temperature = r.value("temperature", c.rft.temperature);
      if (r.contains("modes")) c.rft.modes = string_list(r.at("modes"), "rft.modes");
      if (r.contains("formats")) c.rft.formats = string_list(r.at("formats"), "rft.formats");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto c = parse_run_config(j);

  // Relative paths are taken from the config file's directory.
  const auto base = path.parent_path();
  auto anchor = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  auto anchor_opt = [&](std::optional<std::filesystem::path>& p) {
    if (p) anchor(*p);
  };
  for (auto& d : c.datasets) {
    std::filesystem::path p = d;
    anchor(p);
    d = p.string();
  }
  anchor(c.out);
  anchor(c.assets);
  anchor_opt(c.profiles_dir);
  anchor_opt(c.prompt_dir);
  anchor_opt(c.lexicon_file);
  anchor_opt(c.presets_file);
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json j{{"endpoint", c.endpoint},
         {"profile", c.profile},
         {"strategies", c.strategies},
         {"datasets", c.datasets},
         {"concurrency", c.concurrency},
         {"baseline", c.baseline},
         {"out", c.out.string()},
         {"seed", c.seed ? json(*c.seed) : json(nullptr)},
         {"escalation",
          {{"threshold", c.entropy_threshold ? json(*c.entropy_threshold) : json(nullptr)},
           {"min_count", c.escalation_min_count},
           {"min_fraction", c.escalation_min_fraction},
           {"k", c.logprob_k ? json(*c.logprob_k) : json(nullptr)}}},
         {"generation",
          {{"max_output_tokens", c.generation.max_output_tokens},
           {"temperature", c.generation.temperature},
           {"judge_max_tokens", c.generation.judge_max_tokens}}},
         {"external_grader",
          {{"command", c.external_command ? json(*c.external_command) : json(nullptr)},
           {"timeout_ms", c.external_timeout.count()}}},
         {"rft",
          {{"strategy", c.rft.strategy},
           {"K", c.rft.K},
           {"alpha", c.rft.alpha},
           {"beta", c.rft.beta},
           {"group_size", c.rft.group_size},
           {"fresh_grpo_groups", c.rft.fresh_grpo_groups},
           {"temperature", c.rft.temperature},
           {"modes", c.rft.modes},
           {"formats", c.rft.formats}}}};
  if (c.judge_endpoint) j["judge_endpoint"] = *c.judge_endpoint;
  if (!c.judge_profile.empty()) j["judge_profile"] = c.judge_profile;
  if (!c.assets.empty()) j["assets"] = c.assets.string();
  if (c.profiles_dir) j["profiles_dir"] = c.profiles_dir->string();
  if (c.prompt_dir) j["prompt_dir"] = c.prompt_dir->string();
  if (c.lexicon_file) j["lexicon"] = c.lexicon_file->string();
  if (c.presets_file) j["presets"] = c.presets_file->string();
  return j;
}

Runtime load_runtime(const RunConfig& config) {
  config.validate();
  const auto assets = config.asset_dir();
  try {
    auto profiles = ProfileRegistry::load_dir(config.profiles_dir.value_or(assets / "profiles"));
    if (!profiles.contains(config.profile)) {
      throw ConfigError("unknown profile '" + config.profile + "' (known: " + join(profiles.names()) + ")");
    }
    if (!config.judge_profile.empty() && !profiles.contains(config.judge_profile)) {
      throw ConfigError("unknown judge profile '" + config.judge_profile + "' (known: " + join(profiles.names()) + ")");
    }
    auto profile = profiles.get(config.profile);
    auto prompts = PromptSet::load_dir(config.prompt_dir.value_or(assets / "prompts" / profile.prompt_set_id));
    auto lexicon = TriggerLexicon::load(
        config.lexicon_file.value_or(assets / "lexicons" / (profile.trigger_lexicon_id + ".txt")));
    lexicon = lexicon.extended(profile.extra_trigger_keywords);
    auto presets = PresetRegistry::load(config.presets_file.value_or(assets / "presets" / "presets.json"));

    for (const auto& s : config.strategies) {
      if (!is_known_strategy(s, presets)) throw UnknownStrategyError(s, strategy_names(presets));
    }
    if (!is_known_strategy(config.baseline, presets)) {
      throw UnknownStrategyError(config.baseline, strategy_names(presets));
    }

    EscalationRule rule;
    rule.threshold = config.entropy_threshold.value_or(profile.entropy_threshold);
    rule.min_count = config.escalation_min_count;
    rule.min_fraction = config.escalation_min_fraction;
    rule.k = config.logprob_k.value_or(profile.logprob_k);
    rule.validate();

    return Runtime{std::move(profiles), std::move(profile), std::move(prompts), std::move(lexicon), std::move(presets),
                   rule};
  } catch (const ConfigError&) {
    throw;
  } catch (const UnknownStrategyError& e) {
    throw ConfigError(e.what());
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

StrategyContext make_run_context(CompletionBackend& backend, const Runtime& rt, const RunConfig& config) {
  GenerationSettings settings = config.generation;
  settings.seed = config.seed;
  return StrategyContext{backend, rt.profile, rt.prompts, rt.lexicon, rt.rule, settings};
}

EndpointConfig parse_endpoint_arg(const std::string& arg) {
  if (arg.rfind("http://", 0) == 0 || arg.rfind("https://", 0) == 0) {
    EndpointConfig e;
    e.base_url = arg;
    return e;
  }
  std::ifstream in(arg, std::ios::binary);
  if (!in) throw ConfigError("endpoint '" + arg + "' is neither a URL nor a readable JSON file");
  try {
    return endpoint_from(json::parse(in), arg);
  } catch (const json::parse_error& e) {
    throw ConfigError(arg + ": " + e.what());
  }
}

}  // namespace thinkswitch
