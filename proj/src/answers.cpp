#include "thinkswitch/answers.hpp"

#include <regex>

namespace thinkswitch {

namespace {

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Brace-balanced argument starting just after an opening brace at `open`.
std::optional<std::string> balanced_argument(std::string_view text, std::size_t open) {
  int depth = 1;
  for (std::size_t i = open + 1; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return std::string(text.substr(open + 1, i - open - 1));
  }
  return std::nullopt;
}

// Replaces every `\text{X}` (and \mathrm, \textbf) with X.
std::string unwrap_text_macros(std::string s) {
  for (std::string_view macro : {"\\text{", "\\mathrm{", "\\textbf{", "\\mbox{"}) {
    std::size_t pos;
    while ((pos = s.find(macro)) != std::string::npos) {
      auto open = pos + macro.size() - 1;
      auto arg = balanced_argument(s, open);
      if (!arg) break;
      s.replace(pos, macro.size() + arg->size() + 1, *arg);
    }
  }
  return s;
}

}  // namespace

std::optional<std::string> extract_boxed(std::string_view text) {
  std::optional<std::string> last;
  std::size_t last_pos = 0;
  for (std::string_view macro : {"\\boxed", "\\fbox"}) {
    for (std::size_t pos = text.find(macro); pos != std::string_view::npos; pos = text.find(macro, pos + 1)) {
      std::size_t i = pos + macro.size();
      while (i < text.size() && text[i] == ' ') ++i;
      if (i >= text.size() || text[i] != '{') continue;
      auto arg = balanced_argument(text, i);
      if (arg && (!last || pos > last_pos)) {
        last = std::move(arg);
        last_pos = pos;
      }
    }
  }
  return last;
}

std::optional<char> extract_option_letter(std::string_view text) {
  auto letter_of = [](std::string_view s) -> std::optional<char> {
    std::string t = unwrap_text_macros(std::string(trim(s)));
    std::string_view v = trim(t);
    while (!v.empty() && (v.front() == '(' || v.front() == '*')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ')' || v.back() == '.' || v.back() == '*')) v.remove_suffix(1);
    if (v.size() == 1 && v[0] >= 'A' && v[0] <= 'J') return v[0];
    return std::nullopt;
  };

  if (auto boxed = extract_boxed(text)) {
    if (auto l = letter_of(*boxed)) return l;
  }

  static const std::regex stated(
      R"((?:[Aa]nswer|ANSWER|[Oo]ption|OPTION|[Cc]hoice|CHOICE)\s*(?:is|IS|:)?\s*(?:[Oo]ption\s*)?[:\-]?\s*\**\(?([A-J])\)?(?![A-Za-z]))");
  static const std::regex parenthesised(R"(\(([A-J])\))");
  const std::string s(text);
  std::optional<char> found;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), stated); it != std::sregex_iterator(); ++it) {
    found = (*it)[1].str()[0];
  }
  if (found) return found;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), parenthesised); it != std::sregex_iterator(); ++it) {
    found = (*it)[1].str()[0];
  }
  if (found) return found;
  return letter_of(text);
}

std::string normalize_math_answer(std::string_view answer) {
  std::string s = unwrap_text_macros(std::string(answer));
  replace_all(s, "\xE2\x88\x92", "-");  // U+2212 minus sign
  for (std::string_view junk : {"\\left", "\\right", "\\!", "\\,", "\\;", "\\:", "\\ ", "$"}) replace_all(s, junk, "");
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != ' ' && c != '\n' && c != '\r' && c != '\t') out += c;
  }
  while (!out.empty() && out.back() == '.') out.pop_back();
  if (!out.empty() && out.front() == '+') out.erase(out.begin());
  return out;
}

std::string answer_key(std::string_view response, Domain domain) {
  switch (domain) {
    case Domain::math: {
      if (auto boxed = extract_boxed(response)) return normalize_math_answer(*boxed);
      auto t = trim(response);
      auto nl = t.rfind('\n');
      return normalize_math_answer(nl == std::string_view::npos ? t : t.substr(nl + 1));
    }
    case Domain::science:
      if (auto letter = extract_option_letter(response)) return std::string(1, *letter);
      return normalize_math_answer(response);
    case Domain::code:
      return std::string(trim(response));
  }
  return std::string(trim(response));
}

}  // namespace thinkswitch
