#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "thinkswitch/core.hpp"
#include "thinkswitch/profile.hpp"

namespace thinkswitch {

/// Family-specific request extension fields, merged into the request body.
struct ModeParams {
  nlohmann::json fields = nlohmann::json::object();
  bool operator==(const ModeParams&) const = default;
};

enum class GatewayErrorKind {
  mode_mismatch,   // mode kind does not match the profile family
  transport,       // connection failure, timeout or retryable HTTP status
  decode,          // malformed endpoint payload
  context_length,  // endpoint rejected the request as too long
  rejected,        // any other non-retryable HTTP status
  capability,      // endpoint lacks a feature the strategy needs
};

std::string_view to_string(GatewayErrorKind kind);

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  GatewayErrorKind kind() const { return kind_; }

 private:
  GatewayErrorKind kind_;
};

/// Translate a thinking mode into the profile's native request fields.
/// Throws GatewayError(mode_mismatch) naming both kinds on a family mismatch.
ModeParams map_mode(const ModelProfile& profile, const ThinkingMode& mode);

inline constexpr TokenCount kMaxOutputTokens = 32768;
inline constexpr TokenCount kJudgeMaxTokens = 256;

struct CompletionRequest {
  std::optional<std::string> system_prompt;
  std::string user_message;
  ThinkingMode mode;
  ModeParams mode_params;
  TokenCount max_output_tokens = kMaxOutputTokens;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
  bool want_logprobs = false;
  std::uint32_t logprob_k = 20;

  /// Request under `mode` with mode_params filled from the profile.
  static CompletionRequest for_mode(const ModelProfile& profile, const ThinkingMode& mode,
                                    std::optional<std::string> system_prompt, std::string user_message);
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds max_delay{5000};
  double jitter = 0.5;  // delay scaled by a uniform factor in [1 - jitter, 1 + jitter]
};

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model;  // empty: use the profile's model_name
  std::string api_key_env = "THINKSWITCH_API_KEY";
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{600000};
  RetryPolicy retry;
};

void to_json(nlohmann::json& j, const EndpointConfig& e);
void from_json(const nlohmann::json& j, EndpointConfig& e);

/// Wire body for POST {base_url}/chat/completions.
nlohmann::json build_request_body(const CompletionRequest& request, std::string_view model);

/// Normalise a chat-completions response body into a trace. Total for any
/// byte sequence: malformed input raises GatewayError(decode), never crashes.
ResponseTrace parse_completion_response(std::string_view body, const ModelProfile& profile);

/// Error kind for a non-200 status: transport for retryable statuses (408,
/// 429, 5xx), context_length when the body says so, rejected otherwise.
GatewayErrorKind classify_http_status(int status, std::string_view body);

/// Anything that answers completion requests.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual ResponseTrace complete(const CompletionRequest& request) = 0;
};

/// HTTP client for one endpoint. Each call opens its own connection, so one
/// instance may be shared across worker threads.
class HttpGateway final : public CompletionBackend {
 public:
  HttpGateway(EndpointConfig endpoint, ModelProfile profile);

  ResponseTrace complete(const CompletionRequest& request) override;

  const EndpointConfig& endpoint() const { return endpoint_; }
  const ModelProfile& profile() const { return profile_; }

 private:
  EndpointConfig endpoint_;
  ModelProfile profile_;
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

}  // namespace thinkswitch
