#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "thinkswitch/core.hpp"
#include "thinkswitch/profile.hpp"

namespace thinkswitch {

/// The first balanced `{...}` block of `text`. Braces inside JSON string
/// literals do not count toward the balance. Empty when no block closes.
std::optional<std::string_view> extract_json_block(std::string_view text);

enum class DecisionSource { parsed, fallback };

std::string_view to_string(DecisionSource s);

struct RoutingDecision {
  ThinkingMode mode;
  DecisionSource source = DecisionSource::fallback;
  std::string raw_judge_text;
  std::string reason;  // why the fallback was taken; empty when parsed
};

/// Parse a judge reply against the family's schema:
///   binary / budget families: {"mode": "1"|"2"|"3", "budget": null | tier}
///   effort family:            {"level": "high"|"medium"|"low"}
/// Any deviation folds into the profile's full-think mode with
/// source = fallback. Total over all inputs.
RoutingDecision parse_judge_decision(std::string_view text, InterfaceFamily family, const ModelProfile& profile);

}  // namespace thinkswitch
