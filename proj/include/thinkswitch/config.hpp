#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinkswitch/eval.hpp"
#include "thinkswitch/gateway.hpp"
#include "thinkswitch/presets.hpp"
#include "thinkswitch/profile.hpp"
#include "thinkswitch/prompts.hpp"
#include "thinkswitch/rft.hpp"
#include "thinkswitch/strategies.hpp"
#include "thinkswitch/triggers.hpp"

namespace thinkswitch {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RftSettings {
  std::string strategy = "pt";
  std::size_t K = 4;
  double alpha = 1.0;
  double beta = 0.5;
  std::size_t group_size = 8;
  bool fresh_grpo_groups = true;
  double temperature = 1.0;
  std::vector<std::string> modes;  // mode labels; empty = native modes
  std::vector<std::string> formats{"sft", "dpo", "grpo-log"};
};

/// Everything a CLI run needs. Loaded from one JSON file, then overridden
/// by flags.
struct RunConfig {
  EndpointConfig endpoint;
  std::optional<EndpointConfig> judge_endpoint;
  std::string judge_profile;  // empty: same as profile
  std::string profile = "qwen3.5";
  std::vector<std::string> strategies{"full_think"};
  std::vector<std::string> datasets;
  std::size_t concurrency = kDefaultConcurrency;
  std::string baseline = "full_think";
  std::filesystem::path out = "results";
  std::optional<std::uint64_t> seed;

  std::filesystem::path assets;  // empty: default asset directory
  std::optional<std::filesystem::path> profiles_dir;
  std::optional<std::filesystem::path> prompt_dir;
  std::optional<std::filesystem::path> lexicon_file;
  std::optional<std::filesystem::path> presets_file;

  std::optional<double> entropy_threshold;  // empty: the profile's tau
  std::size_t escalation_min_count = 3;
  double escalation_min_fraction = 0.05;
  std::optional<std::size_t> logprob_k;     // empty: the profile's k

  GenerationSettings generation;
  std::optional<std::string> external_command;
  std::chrono::milliseconds external_timeout{60000};
  RftSettings rft;

  /// Throws ConfigError on any invalid value.
  void validate() const;
  std::filesystem::path asset_dir() const;
};

/// Unknown keys are rejected so typos surface as config errors.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& c);

/// Registries and assets resolved from a config.
struct Runtime {
  ProfileRegistry profiles;
  ModelProfile profile;
  PromptSet prompts;
  TriggerLexicon lexicon;
  PresetRegistry presets;
  EscalationRule rule;
};

/// Loads assets and checks that the profile, strategies and baseline
/// resolve. Throws ConfigError naming the known alternatives.
Runtime load_runtime(const RunConfig& config);

/// Strategy context bound to `backend`, carrying the config's escalation and
/// generation settings.
StrategyContext make_run_context(CompletionBackend& backend, const Runtime& rt, const RunConfig& config);

/// Endpoint from a URL or a JSON file path.
EndpointConfig parse_endpoint_arg(const std::string& arg);

}  // namespace thinkswitch
