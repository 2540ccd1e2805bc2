#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace thinkswitch {

/// Hedging/uncertainty keywords that escalate a no-think pass.
struct TriggerLexicon {
  struct Entry {
    std::string keyword;  // lowercase, stored literally
    std::string category;
  };

  std::string id;
  std::vector<Entry> entries;

  /// Parses the line format of assets/lexicons/*.txt: one keyword per line,
  /// `# category: name` opens a category, other `#` lines are comments.
  static TriggerLexicon parse(std::string id, std::string_view text);
  static TriggerLexicon load(const std::filesystem::path& path);

  /// Copy with extra keywords appended (lowercased, duplicates dropped).
  TriggerLexicon extended(const std::vector<std::string>& extra, std::string_view category = "profile") const;

  std::size_t size() const { return entries.size(); }
};

/// Case-insensitive substring scan. Every matching keyword is reported once,
/// in lexicon order.
std::vector<std::string> scan_triggers(std::string_view text, const TriggerLexicon& lexicon);

}  // namespace thinkswitch
