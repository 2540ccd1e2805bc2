#include "thinkswitch/routing.hpp"

#include <algorithm>
#include <array>
#include <vector>

#include <nlohmann/json.hpp>

namespace thinkswitch {

using nlohmann::json;

std::string_view to_string(DecisionSource s) { return s == DecisionSource::parsed ? "parsed" : "fallback"; }

std::optional<std::string_view> extract_json_block(std::string_view text) {
  // Match braces with a stack; string state is only tracked inside an open
  // brace, so apostrophes and quotes in surrounding prose are ignored.
  std::vector<std::size_t> open;
  std::optional<std::pair<std::size_t, std::size_t>> best;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"' && !open.empty()) {
      in_string = true;
    } else if (c == '{') {
      open.push_back(i);
    } else if (c == '}' && !open.empty()) {
      const auto start = open.back();
      open.pop_back();
      if (!best || start < best->first) best = std::make_pair(start, i);
    }
  }
  if (!best) return std::nullopt;
  return text.substr(best->first, best->second - best->first + 1);
}

namespace {

struct Fallback {
  std::string reason;
};

// "1" / 1 style mode selector; 0 when absent or malformed.
int mode_number(const json& obj) {
  auto it = obj.find("mode");
  if (it == obj.end()) return 0;
  if (it->is_string()) {
    const auto& s = it->get_ref<const std::string&>();
    if (s == "1") return 1;
    if (s == "2") return 2;
    if (s == "3") return 3;
    return 0;
  }
  if (it->is_number_integer()) {
    auto v = it->get<std::int64_t>();
    return (v >= 1 && v <= 3) ? static_cast<int>(v) : 0;
  }
  return 0;
}

// Budget field: nullopt for null/absent; throws Fallback for anything else
// that is not a non-negative integer.
std::optional<TokenCount> budget_field(const json& obj) {
  auto it = obj.find("budget");
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_number_unsigned()) return it->get<TokenCount>();
  throw Fallback{"budget is not null or a non-negative integer"};
}

ThinkingMode decide_mode_schema(const json& obj, InterfaceFamily family, const ModelProfile& profile) {
  const int mode = mode_number(obj);
  if (mode == 0) throw Fallback{"missing or invalid \"mode\""};
  const auto budget = budget_field(obj);
  const bool binary = family == InterfaceFamily::binary_switch;
  switch (mode) {
    case 1:
    case 2:
      if (budget) throw Fallback{"mode " + std::to_string(mode) + " requires budget = null"};
      if (mode == 1) return binary ? ThinkingMode::think() : ThinkingMode::budget(profile.max_output_tokens);
      return binary ? ThinkingMode::no_think() : ThinkingMode::budget(0);
    default: {
      if (!budget) throw Fallback{"mode 3 requires a budget"};
      static constexpr std::array<TokenCount, 3> kBinaryTiers{1024, 2048, 4096};
      static constexpr std::array<TokenCount, 4> kBudgetTiers{512, 1024, 2048, 4096};
      const bool allowed = binary ? std::find(kBinaryTiers.begin(), kBinaryTiers.end(), *budget) != kBinaryTiers.end()
                                  : std::find(kBudgetTiers.begin(), kBudgetTiers.end(), *budget) != kBudgetTiers.end();
      if (!allowed) throw Fallback{"budget " + std::to_string(*budget) + " is not an allowed tier"};
      return binary ? ThinkingMode::think_with_budget(*budget) : ThinkingMode::budget(*budget);
    }
  }
}

ThinkingMode decide_level_schema(const json& obj) {
  auto it = obj.find("level");
  if (it == obj.end() || !it->is_string()) throw Fallback{"missing or invalid \"level\""};
  auto level = parse_effort(it->get_ref<const std::string&>());
  if (!level) throw Fallback{"unknown level '" + it->get<std::string>() + "'"};
  return ThinkingMode::effort(*level);
}

}  // namespace

RoutingDecision parse_judge_decision(std::string_view text, InterfaceFamily family, const ModelProfile& profile) {
  RoutingDecision decision;
  decision.raw_judge_text = std::string(text);
  try {
    auto block = extract_json_block(text);
    if (!block) throw Fallback{"no JSON object in judge reply"};
    json obj = json::parse(block->begin(), block->end(), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) throw Fallback{"judge JSON does not parse"};
    ThinkingMode mode = family == InterfaceFamily::discrete_effort ? decide_level_schema(obj)
                                                                   : decide_mode_schema(obj, family, profile);
    if (!validate_mode(mode, profile)) throw Fallback{"routed mode " + mode.label() + " is invalid for the profile"};
    decision.mode = mode;
    decision.source = DecisionSource::parsed;
  } catch (const Fallback& f) {
    decision.mode = full_think_mode(profile);
    decision.source = DecisionSource::fallback;
    decision.reason = f.reason;
  } catch (const json::exception& e) {
    decision.mode = full_think_mode(profile);
    decision.source = DecisionSource::fallback;
    decision.reason = e.what();
  }
  return decision;
}

}  // namespace thinkswitch
