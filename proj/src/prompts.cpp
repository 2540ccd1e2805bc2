#include "thinkswitch/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace thinkswitch {

namespace {

bool is_ident_char(char c) { return (c >= 'a' && c <= 'z') || c == '_' || (c >= '0' && c <= '9'); }

// Length of the `{identifier}` placeholder starting at pos, or 0.
std::size_t placeholder_length(std::string_view s, std::size_t pos) {
  if (s[pos] != '{') return 0;
  std::size_t i = pos + 1;
  if (i >= s.size() || !(s[i] >= 'a' && s[i] <= 'z')) return 0;
  while (i < s.size() && is_ident_char(s[i])) ++i;
  if (i >= s.size() || s[i] != '}') return 0;
  return i - pos + 1;
}

std::string read_asset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PromptError("missing prompt asset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (text.ends_with("\r\n")) {
    text.resize(text.size() - 2);
  } else if (text.ends_with('\n')) {
    text.pop_back();
  }
  return text;
}

void require_placeholders(const std::string& name, const std::string& text, std::set<std::string> declared) {
  auto found = placeholders_in(text);
  std::set<std::string> unique(found.begin(), found.end());
  if (unique != declared || found.size() != unique.size()) {
    std::string got;
    for (const auto& p : found) got += "{" + p + "}";
    throw PromptError("prompt " + name + " has placeholders " + (got.empty() ? "(none)" : got) +
                      " which differ from its declared set");
  }
}

constexpr InterfaceFamily kFamilies[] = {InterfaceFamily::binary_switch, InterfaceFamily::discrete_effort,
                                         InterfaceFamily::numeric_budget};
constexpr Domain kDomains[] = {Domain::math, Domain::science, Domain::code};

// Placeholders each preset prompt may carry; unlisted presets carry none.
const std::map<std::string, std::set<std::string>, std::less<>>& preset_placeholders() {
  static const std::map<std::string, std::set<std::string>, std::less<>> table{
      {"tale_estimate_user", {"problem"}},
      {"tale_solve_system", {"budget"}},
      {"budget_guidance_system", {"budget"}},
      {"deer_answer_user", {"user_message", "reasoning"}},
  };
  return table;
}

}  // namespace

std::vector<std::string> placeholders_in(std::string_view tmpl) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (auto len = placeholder_length(tmpl, i)) {
      out.emplace_back(tmpl.substr(i + 1, len - 2));
      i += len - 1;
    }
  }
  return out;
}

std::string substitute(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (auto len = placeholder_length(tmpl, i)) {
      auto it = values.find(tmpl.substr(i + 1, len - 2));
      if (it != values.end()) {
        out += it->second;
        i += len - 1;
        continue;
      }
    }
    out += tmpl[i];
  }
  return out;
}

PromptSet PromptSet::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw PromptError("prompt set directory not found: " + dir.string());
  PromptSet set;
  set.id = dir.filename().string();

  auto load = [&](const std::string& name, std::set<std::string> declared) {
    auto text = read_asset(dir / (name + ".txt"));
    require_placeholders(name, text, std::move(declared));
    return text;
  };

  for (auto family : kFamilies) {
    const std::string f(to_string(family));
    set.pt_system[family] = load("pt_system." + f, {});
    set.routing_judge[family] = ChatMessages{load("judge_system." + f, {}), load("judge_user." + f, {"problem"})};
  }
  set.pt_user = load("pt_user", {"problem"});
  set.routing_solve_system = load("routing_solve_system", {});
  set.sft_mode_selection_system = load("sft_mode_selection_system", {});
  set.baseline_system = load("baseline_system", {});
  for (auto domain : kDomains) {
    const std::string d(to_string(domain));
    set.answer_format[domain] = load("answer_format." + d, {});
    set.user_template[domain] = load("user_template." + d, {"problem"});
  }
  set.llm_judge = ChatMessages{load("llm_judge_system", {}), load("llm_judge_user", {"problem", "reference", "response"})};

  const auto preset_dir = dir / "presets";
  if (std::filesystem::is_directory(preset_dir)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(preset_dir)) {
      if (entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      const auto key = path.stem().string();
      const auto base = key.substr(0, key.find('.'));
      auto text = read_asset(path);
      const auto& table = preset_placeholders();
      auto it = table.find(base);
      require_placeholders("presets/" + key, text, it == table.end() ? std::set<std::string>{} : it->second);
      set.presets.emplace(key, std::move(text));
    }
  }
  return set;
}

const std::string& PromptSet::preset(std::string_view key) const {
  auto it = presets.find(key);
  if (it == presets.end()) throw PromptError("prompt set '" + id + "' has no preset prompt '" + std::string(key) + "'");
  return it->second;
}

namespace {

const std::string& domain_entry(const std::map<Domain, std::string>& table, Domain d, const PromptSet& set,
                                std::string_view what) {
  auto it = table.find(d);
  if (it == table.end()) {
    throw PromptError("prompt set '" + set.id + "' has no " + std::string(what) + " for domain " +
                      std::string(to_string(d)));
  }
  return it->second;
}

}  // namespace

std::string render_user_message(const Query& q, const PromptSet& set) {
  return substitute(domain_entry(set.user_template, q.domain, set, "user template"), {{"problem", q.problem}});
}

std::string render_pt_user_message(const Query& q, const PromptSet& set) {
  const auto& format = domain_entry(set.answer_format, q.domain, set, "answer format");
  return substitute(set.pt_user, {{"problem", q.problem}}) + "\n\n" + format;
}

ChatMessages render_judge_messages(const Query& q, InterfaceFamily family, const PromptSet& set) {
  auto it = set.routing_judge.find(family);
  if (it == set.routing_judge.end()) {
    throw PromptError("prompt set '" + set.id + "' has no judge template for family " +
                      std::string(to_string(family)));
  }
  return ChatMessages{it->second.system, substitute(it->second.user, {{"problem", q.problem}})};
}

ChatMessages render_llm_judge(const Query& q, std::string_view reference, std::string_view response,
                              const PromptSet& set) {
  return ChatMessages{set.llm_judge.system,
                      substitute(set.llm_judge.user, {{"problem", q.problem},
                                                      {"reference", std::string(reference)},
                                                      {"response", std::string(response)}})};
}

std::string strategy_system_prompt(std::string_view strategy, InterfaceFamily family, const PromptSet& set) {
  if (strategy == "pt") {
    auto it = set.pt_system.find(family);
    if (it == set.pt_system.end()) throw PromptError("no prompt-tuning system prompt for this family");
    return it->second;
  }
  if (strategy == "rt") return set.routing_solve_system;
  if (strategy == "baseline") return set.baseline_system;
  throw PromptError("unknown prompt strategy '" + std::string(strategy) + "' (expected pt, rt or baseline)");
}

}  // namespace thinkswitch
