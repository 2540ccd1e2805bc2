#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "thinkswitch/gateway.hpp"

namespace thinkswitch {

class FixtureError : public std::runtime_error {
 public:
  FixtureError(std::string file, std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// One scripted token with its top-k alternatives.
struct ScriptToken {
  std::string token;
  double logprob = 0.0;
  std::vector<TokenCandidate> top;
};

struct ScriptReply {
  std::string thinking;
  std::string answer;
  std::optional<TokenCount> thinking_tokens;  // default: whitespace pieces of `thinking`
  std::optional<TokenCount> answer_tokens;    // default: whitespace pieces of `answer`
  bool report_split = true;                   // emit completion_tokens_details.reasoning_tokens
  bool inline_thinking = false;               // thinking inside content between delimiters
  std::string think_open = "<think>";
  std::string think_close = "</think>";
  /// Explicit table; when absent, one confident entry per token is
  /// synthesised (with uniform top-k rows at `uncertain_at`).
  std::optional<std::vector<ScriptToken>> logprobs;
  bool logprobs_available = true;
  std::vector<std::size_t> uncertain_at;
  double confident_logprob = -0.01;
  int status = 200;
  nlohmann::json error;  // non-null: body is {"error": error}
};

struct ScriptMatch {
  std::optional<std::string> contains;         // substring of the user message
  std::optional<std::string> system_contains;  // substring of the system prompt
  std::optional<bool> thinking;                // derived from the mode fields
  nlohmann::json params = nlohmann::json::object();  // subset of the request body
};

struct ScriptEntry {
  ScriptMatch match;
  std::vector<ScriptReply> replies;  // chosen by seed % size
  std::chrono::milliseconds latency{0};
  std::size_t fail_first = 0;        // first N matching requests get HTTP 503
  std::size_t line = 0;
};

struct MockResponse {
  int status = 200;
  std::string body;
  std::chrono::milliseconds latency{0};
  std::optional<std::size_t> entry;  // index of the matched entry; empty = default
};

/// A validated, read-only script. Entries are tried in order; the first
/// match answers.
class MockScript {
 public:
  std::vector<ScriptEntry> entries;
  ScriptReply default_reply;

  /// Index of the first entry matching the request body, if any.
  std::optional<std::size_t> find(const nlohmann::json& request) const;

  /// Scripted response for a request body (ignores fail_first).
  MockResponse respond(const nlohmann::json& request) const;
};

/// Whitespace-delimited pieces, each carrying its leading whitespace; the
/// mock's notion of a token.
std::vector<std::string> mock_tokenize(std::string_view text);

/// Whether the request's mode fields enable thinking: enable_thinking true,
/// reasoning_effort medium/high, or a positive thinking_budget.
bool request_thinks(const nlohmann::json& request);

ScriptReply parse_reply(const nlohmann::json& j);
MockScript parse_fixture(std::string_view text, const std::string& source = "<memory>");

/// Line-delimited fixture: each non-blank line not starting with '#' is an
/// entry {match, reply | replies, latency_ms, fail_first} or {"default": reply}.
MockScript script_from_fixture(const std::filesystem::path& path);

class MockBindError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Loopback HTTP server answering POST .../chat/completions from a script.
class MockServer {
 public:
  explicit MockServer(MockScript script);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Throws MockBindError when the port cannot be bound.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  bool running() const;

  int port() const { return port_; }
  std::string base_url() const;
  std::size_t request_count() const;
  /// Request bodies in arrival order.
  std::vector<nlohmann::json> requests() const;

 private:
  MockResponse handle(const std::string& body);

  struct Impl;
  std::unique_ptr<Impl> impl_;
  MockScript script_;
  int port_ = 0;
  std::string host_;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::vector<std::size_t> failures_served_;
  std::vector<nlohmann::json> requests_;
};

/// In-process backend that runs requests through the script and the normal
/// response parser, without HTTP.
class ScriptBackend final : public CompletionBackend {
 public:
  ScriptBackend(const MockScript& script, ModelProfile profile) : script_(script), profile_(std::move(profile)) {}
  ResponseTrace complete(const CompletionRequest& request) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  const MockScript& script_;
  ModelProfile profile_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace thinkswitch
