#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinkswitch/core.hpp"

namespace thinkswitch {

/// A model family's native reasoning-depth interface.
enum class InterfaceFamily { binary_switch, discrete_effort, numeric_budget };

std::string_view to_string(InterfaceFamily f);
InterfaceFamily parse_family(std::string_view text);
ModeKind mode_kind_of(InterfaceFamily f);

/// Calibrated constants and wire conventions for one model family.
struct ModelProfile {
  std::string name;
  InterfaceFamily family = InterfaceFamily::binary_switch;
  std::string model_name;
  double entropy_threshold = 0.10;
  std::uint32_t logprob_k = 20;
  std::string trigger_lexicon_id = "default";
  std::string prompt_set_id = "default";
  TokenCount max_output_tokens = 32768;  // B_max

  // Delimiters around thinking text when the endpoint inlines it in content.
  std::string think_open = "<think>";
  std::string think_close = "</think>";

  // Binary-switch endpoints that also take a thinking-token cap.
  bool accepts_thinking_budget = true;

  // Wire field names for the family-specific extension fields.
  std::string thinking_switch_field = "chat_template_kwargs.enable_thinking";
  std::string effort_field = "reasoning_effort";
  std::string budget_field = "thinking_budget";

  // Extra trigger keywords appended to the shared lexicon for this family.
  std::vector<std::string> extra_trigger_keywords;
};

void to_json(nlohmann::json& j, const ModelProfile& p);
void from_json(const nlohmann::json& j, ModelProfile& p);

/// Maximal-reasoning mode: think / effort high / budget B_max.
ThinkingMode full_think_mode(const ModelProfile& p);
/// Minimal-reasoning mode: no_think / effort low / budget 0.
ThinkingMode minimal_mode(const ModelProfile& p);
/// The family's native mode set used for multi-mode sampling.
std::vector<ThinkingMode> native_modes(const ModelProfile& p);

ModelProfile load_profile(const std::filesystem::path& path);

/// Profiles loaded from a directory of *.json files, keyed by name.
class ProfileRegistry {
 public:
  static ProfileRegistry load_dir(const std::filesystem::path& dir);

  void add(ModelProfile p);
  const ModelProfile& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, ModelProfile, std::less<>> profiles_;
};

/// Root of the shipped asset tree; THINKSWITCH_ASSETS overrides the
/// compiled-in location.
std::filesystem::path default_asset_dir();

}  // namespace thinkswitch
