#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "thinkswitch/mock.hpp"
#include "thinkswitch/presets.hpp"
#include "thinkswitch/profile.hpp"
#include "thinkswitch/prompts.hpp"
#include "thinkswitch/triggers.hpp"

namespace testing {

inline std::filesystem::path assets() { return thinkswitch::default_asset_dir(); }

inline const thinkswitch::ProfileRegistry& profiles() {
  static const auto reg = thinkswitch::ProfileRegistry::load_dir(assets() / "profiles");
  return reg;
}

inline const thinkswitch::ModelProfile& profile(std::string_view name) { return profiles().get(name); }

inline const thinkswitch::PromptSet& prompts() {
  static const auto set = thinkswitch::PromptSet::load_dir(assets() / "prompts" / "default");
  return set;
}

inline const thinkswitch::TriggerLexicon& lexicon() {
  static const auto lex = thinkswitch::TriggerLexicon::load(assets() / "lexicons" / "default.txt");
  return lex;
}

inline const thinkswitch::PresetRegistry& presets() {
  static const auto reg = thinkswitch::PresetRegistry::load(assets() / "presets" / "presets.json");
  return reg;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("thinkswitch-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
