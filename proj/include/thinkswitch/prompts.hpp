#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "thinkswitch/core.hpp"
#include "thinkswitch/profile.hpp"

namespace thinkswitch {

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChatMessages {
  std::string system;
  std::string user;
  bool operator==(const ChatMessages&) const = default;
};

/// Names of `{identifier}` placeholders in a template, in order of
/// appearance (duplicates kept). Braces around anything else are literal.
std::vector<std::string> placeholders_in(std::string_view tmpl);

/// Single-pass substitution of the named placeholders. Values are inserted
/// literally and never rescanned, so braces inside them are inert.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

/// Every prompt used by the strategies, loaded from a versioned asset
/// directory. Read-only after load.
struct PromptSet {
  std::string id;
  std::map<InterfaceFamily, std::string> pt_system;
  std::string pt_user;
  std::map<InterfaceFamily, ChatMessages> routing_judge;
  std::string routing_solve_system;
  std::string sft_mode_selection_system;
  std::string baseline_system;
  std::map<Domain, std::string> answer_format;
  std::map<Domain, std::string> user_template;
  ChatMessages llm_judge;
  /// Preset prompts keyed by file stem, e.g. "cod_system.math".
  std::map<std::string, std::string, std::less<>> presets;

  /// Loads `dir` (named after the set id). Each template is checked to carry
  /// exactly the placeholders it declares.
  static PromptSet load_dir(const std::filesystem::path& dir);

  const std::string& preset(std::string_view key) const;
};

/// Problem text plus the domain answer-format instruction.
std::string render_user_message(const Query& q, const PromptSet& set);

/// Prompt-tuning wrapper around the problem, followed by the answer-format
/// instruction.
std::string render_pt_user_message(const Query& q, const PromptSet& set);

ChatMessages render_judge_messages(const Query& q, InterfaceFamily family, const PromptSet& set);

ChatMessages render_llm_judge(const Query& q, std::string_view reference, std::string_view response,
                              const PromptSet& set);

/// System prompt shared by training-data construction and inference:
/// "pt" (family prompt-tuning prompt), "rt" (routing solve prompt) or
/// "baseline".
std::string strategy_system_prompt(std::string_view strategy, InterfaceFamily family, const PromptSet& set);

}  // namespace thinkswitch
