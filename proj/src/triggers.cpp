#include "thinkswitch/triggers.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace thinkswitch {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

TriggerLexicon TriggerLexicon::parse(std::string id, std::string_view text) {
  TriggerLexicon lex;
  lex.id = std::move(id);
  std::string category = "uncategorised";
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.ends_with('\r')) line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view tag = "# category:";
      if (line.starts_with(tag)) {
        auto name = line.substr(tag.size());
        while (!name.empty() && name.front() == ' ') name.remove_prefix(1);
        category = std::string(name);
      }
      continue;
    }
    if (lowercase(line) != line) {
      throw std::invalid_argument("lexicon " + lex.id + " line " + std::to_string(line_no) + ": keyword '" +
                                  std::string(line) + "' is not lowercase");
    }
    lex.entries.push_back({std::string(line), category});
  }
  return lex;
}

TriggerLexicon TriggerLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open lexicon " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(path.stem().string(), ss.str());
}

TriggerLexicon TriggerLexicon::extended(const std::vector<std::string>& extra, std::string_view category) const {
  TriggerLexicon out = *this;
  for (const auto& kw : extra) {
    auto lower = lowercase(kw);
    bool present = std::any_of(out.entries.begin(), out.entries.end(),
                               [&](const Entry& e) { return e.keyword == lower; });
    if (!present && !lower.empty()) out.entries.push_back({std::move(lower), std::string(category)});
  }
  return out;
}

std::vector<std::string> scan_triggers(std::string_view text, const TriggerLexicon& lexicon) {
  const std::string haystack = lowercase(text);
  std::vector<std::string> hits;
  for (const auto& e : lexicon.entries) {
    if (haystack.find(e.keyword) != std::string::npos) hits.push_back(e.keyword);
  }
  return hits;
}

}  // namespace thinkswitch
