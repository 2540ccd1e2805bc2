#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "thinkswitch/core.hpp"
#include "thinkswitch/profile.hpp"

namespace testing {

/// A judge reply and the mode it must route to; empty means the parser must
/// fall back to full think.
struct JudgeCase {
  std::string text;
  std::optional<thinkswitch::ThinkingMode> expected;
  std::string kind;
};

/// Generates labelled judge replies for one family. Labels come from how the
/// case was built, not from the parser.
class JudgeCaseGenerator {
 public:
  JudgeCaseGenerator(const thinkswitch::ModelProfile& profile, std::uint64_t seed) : profile_(profile), rng_(seed) {}

  JudgeCase next() {
    switch (pick(6)) {
      case 0:
        return valid();
      case 1:
        return wrapped(valid());
      case 2:
        return invalid();
      case 3:
        return truncated();
      case 4:
        return garbage();
      default:
        return wrapped(invalid());
    }
  }

 private:
  using Family = thinkswitch::InterfaceFamily;

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  std::string ws() {
    static const char* pads[] = {"", " ", "\n", "  ", "\t"};
    return pads[pick(5)];
  }

  std::string object(std::vector<std::pair<std::string, std::string>> fields) {
    if (pick(2)) std::reverse(fields.begin(), fields.end());
    std::string out = "{" + ws();
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += "," + ws();
      out += "\"" + fields[i].first + "\":" + ws() + fields[i].second;
    }
    return out + ws() + "}";
  }

  JudgeCase valid() {
    using thinkswitch::ThinkingMode;
    if (profile_.family == Family::discrete_effort) {
      static const char* levels[] = {"high", "medium", "low"};
      const auto i = pick(3);
      return {object({{"level", std::string("\"") + levels[i] + "\""}}),
              ThinkingMode::effort(*thinkswitch::parse_effort(levels[i])), "valid"};
    }
    const bool binary = profile_.family == Family::binary_switch;
    switch (pick(3)) {
      case 0:
        return {object({{"mode", "\"1\""}, {"budget", "null"}}),
                binary ? ThinkingMode::think() : ThinkingMode::budget(profile_.max_output_tokens), "valid"};
      case 1:
        return {object({{"mode", "\"2\""}, {"budget", "null"}}),
                binary ? ThinkingMode::no_think() : ThinkingMode::budget(0), "valid"};
      default: {
        const std::vector<thinkswitch::TokenCount> tiers =
            binary ? std::vector<thinkswitch::TokenCount>{1024, 2048, 4096}
                   : std::vector<thinkswitch::TokenCount>{512, 1024, 2048, 4096};
        const auto b = tiers[pick(tiers.size())];
        return {object({{"mode", "\"3\""}, {"budget", std::to_string(b)}}),
                binary ? ThinkingMode::think_with_budget(b) : ThinkingMode::budget(b), "valid"};
      }
    }
  }

  JudgeCase invalid() {
    if (profile_.family == Family::discrete_effort) {
      static const char* bad[] = {R"({"level": "extreme"})", R"({"level": 1})",       R"({"mode": "1", "budget": null})",
                                  R"({"Level": "high"})",    R"({"level": null})",   R"({})",
                                  R"({"level": ["high"]})",  R"({"level": "HIGH!"})"};
      return {bad[pick(std::size(bad))], std::nullopt, "invalid"};
    }
    static const char* bad[] = {R"({"mode": "4", "budget": null})",   R"({"mode": "3", "budget": 3000})",
                                R"({"mode": "3", "budget": null})",   R"({"mode": "1", "budget": 1024})",
                                R"({"mode": "2", "budget": 2048})",   R"({"budget": 1024})",
                                R"({"mode": "three", "budget": 1024})", R"({"mode": "3", "budget": "1024"})",
                                R"({"mode": "3", "budget": -512})",   R"({"mode": null, "budget": null})",
                                R"({"level": "high"})",               R"({"mode": "1", "budget": 1.5})",
                                R"({"mode": "3", "budget": 100000})", R"({"mode": ["1"], "budget": null})"};
    std::string text = bad[pick(std::size(bad))];
    // 512 is a tier only for the budget family.
    if (profile_.family == Family::binary_switch && pick(4) == 0) text = R"({"mode": "3", "budget": 512})";
    return {text, std::nullopt, "invalid"};
  }

  JudgeCase wrapped(JudgeCase c) {
    static const char* before[] = {"", "Sure. ", "The problem looks hard.\n", "```json\n", "My choice: ",
                                   "I can't be sure, but "};
    static const char* after[] = {"", "\n```", " Hope that helps.", "\nDone.", " (final)"};
    c.text = std::string(before[pick(std::size(before))]) + c.text + after[pick(std::size(after))];
    c.kind += "+wrapped";
    return c;
  }

  JudgeCase truncated() {
    auto c = valid();
    const auto close = c.text.rfind('}');
    c.text = c.text.substr(0, pick(close));
    c.expected.reset();
    c.kind = "truncated";
    return c;
  }

  JudgeCase garbage() {
    std::string s;
    const auto n = pick(80);
    for (std::size_t i = 0; i < n; ++i) {
      char ch = static_cast<char>(rng_() & 0xff);
      if (ch == '{') ch = '(';
      s.push_back(ch);
    }
    if (pick(3) == 0) s = "I would pick mode two because the problem is easy.";
    return {s, std::nullopt, "garbage"};
  }

  const thinkswitch::ModelProfile& profile_;
  std::mt19937_64 rng_;
};

}  // namespace testing
