#include "thinkswitch/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace thinkswitch {

using nlohmann::json;

std::string_view to_string(GatewayErrorKind kind) {
  switch (kind) {
    case GatewayErrorKind::mode_mismatch: return "mode_mismatch";
    case GatewayErrorKind::transport: return "transport";
    case GatewayErrorKind::decode: return "decode";
    case GatewayErrorKind::context_length: return "context_length";
    case GatewayErrorKind::rejected: return "rejected";
    case GatewayErrorKind::capability: return "capability";
  }
  return "unknown";
}

namespace {

// Sets a value at a dotted path such as "chat_template_kwargs.enable_thinking".
void set_path(json& root, std::string_view dotted, json value) {
  json* node = &root;
  while (true) {
    auto dot = dotted.find('.');
    std::string key(dotted.substr(0, dot));
    if (dot == std::string_view::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    dotted.remove_prefix(dot + 1);
  }
}

}  // namespace

ModeParams map_mode(const ModelProfile& profile, const ThinkingMode& mode) {
  const ModeKind expected = mode_kind_of(profile.family);
  if (mode.kind() != expected) {
    throw GatewayError(GatewayErrorKind::mode_mismatch,
                       "mode kind '" + std::string(to_string(mode.kind())) + "' does not match profile '" +
                           profile.name + "' family kind '" + std::string(to_string(expected)) + "'");
  }
  ModeParams params;
  if (auto b = mode.get_if<BinaryMode>()) {
    set_path(params.fields, profile.thinking_switch_field, b->think);
    if (b->think && b->budget && profile.accepts_thinking_budget) {
      set_path(params.fields, profile.budget_field, *b->budget);
    }
  } else if (auto e = mode.get_if<EffortMode>()) {
    set_path(params.fields, profile.effort_field, std::string(to_string(e->level)));
  } else if (auto n = mode.get_if<BudgetMode>()) {
    set_path(params.fields, profile.budget_field, n->tokens);
  }
  return params;
}

CompletionRequest CompletionRequest::for_mode(const ModelProfile& profile, const ThinkingMode& mode,
                                              std::optional<std::string> system_prompt, std::string user_message) {
  CompletionRequest req;
  req.system_prompt = std::move(system_prompt);
  req.user_message = std::move(user_message);
  req.mode = mode;
  req.mode_params = map_mode(profile, mode);
  req.max_output_tokens = std::min<TokenCount>(profile.max_output_tokens, kMaxOutputTokens);
  req.logprob_k = profile.logprob_k;
  return req;
}

void to_json(json& j, const EndpointConfig& e) {
  j = json{{"base_url", e.base_url},
           {"model", e.model},
           {"api_key_env", e.api_key_env},
           {"connect_timeout_ms", e.connect_timeout.count()},
           {"read_timeout_ms", e.read_timeout.count()},
           {"retry",
            {{"max_attempts", e.retry.max_attempts},
             {"base_delay_ms", e.retry.base_delay.count()},
             {"max_delay_ms", e.retry.max_delay.count()},
             {"jitter", e.retry.jitter}}}};
}

void from_json(const json& j, EndpointConfig& e) {
  EndpointConfig d;
  e.base_url = j.value("base_url", d.base_url);
  e.model = j.value("model", d.model);
  e.api_key_env = j.value("api_key_env", d.api_key_env);
  e.connect_timeout = std::chrono::milliseconds(j.value("connect_timeout_ms", d.connect_timeout.count()));
  e.read_timeout = std::chrono::milliseconds(j.value("read_timeout_ms", d.read_timeout.count()));
  e.retry = d.retry;
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    e.retry.max_attempts = r.value("max_attempts", d.retry.max_attempts);
    e.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", d.retry.base_delay.count()));
    e.retry.max_delay = std::chrono::milliseconds(r.value("max_delay_ms", d.retry.max_delay.count()));
    e.retry.jitter = r.value("jitter", d.retry.jitter);
  }
  if (e.retry.max_attempts < 1) throw SchemaError("endpoint retry.max_attempts must be >= 1");
}

json build_request_body(const CompletionRequest& request, std::string_view model) {
  json messages = json::array();
  if (request.system_prompt) messages.push_back({{"role", "system"}, {"content", *request.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", request.user_message}});
  json body{{"model", model},
            {"messages", std::move(messages)},
            {"max_tokens", request.max_output_tokens},
            {"temperature", request.temperature}};
  if (request.seed) body["seed"] = *request.seed;
  if (request.want_logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = request.logprob_k;
  }
  body.merge_patch(request.mode_params.fields);
  return body;
}

namespace {

[[noreturn]] void decode_error(const std::string& what) {
  throw GatewayError(GatewayErrorKind::decode, "malformed endpoint payload: " + what);
}

std::optional<TokenCount> get_count(const json& obj, std::string_view key) {
  if (!obj.is_object()) return std::nullopt;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_number_unsigned()) return it->get<TokenCount>();
  if (it->is_number_integer()) {
    auto v = it->get<std::int64_t>();
    if (v < 0) decode_error(std::string(key) + " is negative");
    return static_cast<TokenCount>(v);
  }
  decode_error(std::string(key) + " is not an integer");
}

std::string get_text(const json& obj, std::string_view key) {
  if (!obj.is_object()) return {};
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) decode_error(std::string(key) + " is not a string");
  return it->get<std::string>();
}

std::string_view trim_left(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\n' || s.front() == '\r' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  return s;
}

// Splits inline thinking text out of the content using the profile delimiters.
// Returns false when no delimiter was found.
bool split_inline_thinking(const std::string& content, const ModelProfile& profile, std::string& thinking,
                           std::string& answer) {
  if (profile.think_close.empty()) return false;
  const auto close = content.find(profile.think_close);
  const auto open = profile.think_open.empty() ? std::string::npos : content.find(profile.think_open);
  if (close == std::string::npos) {
    if (open == std::string::npos) return false;
    // Truncated inside the thinking block.
    thinking = content.substr(open + profile.think_open.size());
    answer.clear();
    return true;
  }
  const auto begin = (open != std::string::npos && open < close) ? open + profile.think_open.size() : 0;
  thinking = content.substr(begin, close - begin);
  answer = std::string(trim_left(std::string_view(content).substr(close + profile.think_close.size())));
  return true;
}

std::vector<TokenLogprobs> parse_logprobs(const json& content, std::uint32_t k) {
  if (!content.is_array()) decode_error("logprobs.content is not an array");
  std::vector<TokenLogprobs> out;
  out.reserve(content.size());
  for (const auto& entry : content) {
    if (!entry.is_object()) decode_error("logprob entry is not an object");
    TokenLogprobs tok;
    tok.token = get_text(entry, "token");
    auto lp = entry.find("logprob");
    if (lp == entry.end() || !lp->is_number()) decode_error("logprob entry lacks a numeric logprob");
    tok.logprob = lp->get<double>();
    if (!std::isfinite(tok.logprob)) decode_error("non-finite logprob");
    if (auto top = entry.find("top_logprobs"); top != entry.end() && !top->is_null()) {
      if (!top->is_array()) decode_error("top_logprobs is not an array");
      for (const auto& cand : *top) {
        if (tok.top.size() >= k) break;
        if (!cand.is_object()) decode_error("top_logprobs entry is not an object");
        auto clp = cand.find("logprob");
        if (clp == cand.end() || !clp->is_number()) decode_error("candidate lacks a numeric logprob");
        double v = clp->get<double>();
        if (!std::isfinite(v)) decode_error("non-finite candidate logprob");
        tok.top.push_back({get_text(cand, "token"), v});
      }
    }
    if (tok.top.empty()) tok.top.push_back({tok.token, tok.logprob});
    out.push_back(std::move(tok));
  }
  return out;
}

bool mentions_context_length(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower.find("context length") != std::string::npos || lower.find("context_length") != std::string::npos ||
         lower.find("maximum context") != std::string::npos || lower.find("too many tokens") != std::string::npos;
}

}  // namespace

ResponseTrace parse_completion_response(std::string_view body, const ModelProfile& profile) {
  json doc = json::parse(body.begin(), body.end(), nullptr, false);
  if (doc.is_discarded()) decode_error("body is not valid JSON");
  if (!doc.is_object()) decode_error("body is not a JSON object");
  try {
    if (auto err = doc.find("error"); err != doc.end() && !err->is_null()) {
      std::string msg = err->is_object() ? err->value("message", err->dump()) : err->dump();
      if (mentions_context_length(msg) || (err->is_object() && mentions_context_length(err->value("code", "")))) {
        throw GatewayError(GatewayErrorKind::context_length, msg);
      }
      throw GatewayError(GatewayErrorKind::rejected, msg);
    }
    auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) decode_error("missing choices");
    const json& choice = choices->front();
    if (!choice.is_object()) decode_error("choice is not an object");
    auto message = choice.find("message");
    if (message == choice.end() || !message->is_object()) decode_error("choice lacks a message object");

    ResponseTrace trace;
    std::string content = get_text(*message, "content");
    std::string reasoning = get_text(*message, "reasoning_content");
    if (reasoning.empty()) reasoning = get_text(*message, "reasoning");
    bool inline_split = false;
    if (!reasoning.empty()) {
      trace.thinking_text = std::move(reasoning);
      trace.answer_text = std::move(content);
    } else {
      inline_split = split_inline_thinking(content, profile, trace.thinking_text, trace.answer_text);
      if (!inline_split) trace.answer_text = std::move(content);
    }
    trace.finish_reason = get_text(choice, "finish_reason");

    auto usage = doc.find("usage");
    if (usage == doc.end() || !usage->is_object()) decode_error("missing usage block");
    auto total = get_count(*usage, "completion_tokens");
    if (!total) decode_error("usage lacks completion_tokens");
    trace.total_tokens = *total;

    std::optional<TokenCount> reported;
    if (auto details = usage->find("completion_tokens_details"); details != usage->end() && details->is_object()) {
      reported = get_count(*details, "reasoning_tokens");
    }
    if (reported) {
      if (*reported > trace.total_tokens) decode_error("reasoning_tokens exceeds completion_tokens");
      trace.thinking_tokens = *reported;
      trace.split = TokenSplit::reported;
    } else if (!trace.thinking_text.empty() || inline_split) {
      const TokenCount estimate = (trace.thinking_text.size() + 3) / 4;
      trace.thinking_tokens = std::min(estimate, trace.total_tokens);
      trace.split = TokenSplit::estimated;
    } else {
      trace.thinking_tokens = 0;
      trace.split = TokenSplit::unavailable;
    }
    trace.answer_tokens = trace.total_tokens - trace.thinking_tokens;

    if (auto lp = choice.find("logprobs"); lp != choice.end() && !lp->is_null()) {
      if (!lp->is_object()) decode_error("logprobs is not an object");
      if (auto c = lp->find("content"); c != lp->end() && !c->is_null()) {
        trace.per_token_logprobs = parse_logprobs(*c, profile.logprob_k);
      }
    }
    return trace;
  } catch (const json::exception& e) {
    decode_error(e.what());
  }
}

namespace {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw SchemaError("endpoint base_url must include a scheme: " + url);
  const auto path_begin = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.scheme_host_port = url.substr(0, path_begin);
  std::string path = path_begin == std::string::npos ? std::string{} : url.substr(path_begin);
  while (!path.empty() && path.back() == '/') path.pop_back();
  constexpr std::string_view suffix = "/chat/completions";
  if (!path.ends_with(suffix)) path += suffix;
  out.path = std::move(path);
  return out;
}

double jitter_factor(double jitter) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> dist(1.0 - jitter, 1.0 + jitter);
  return dist(rng);
}

}  // namespace

HttpGateway::HttpGateway(EndpointConfig endpoint, ModelProfile profile)
    : endpoint_(std::move(endpoint)), profile_(std::move(profile)) {
  auto parts = split_url(endpoint_.base_url);
  scheme_host_port_ = std::move(parts.scheme_host_port);
  path_ = std::move(parts.path);
  if (!endpoint_.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint_.api_key_env.c_str())) api_key_ = key;
  }
  if (endpoint_.model.empty()) endpoint_.model = profile_.model_name;
}

GatewayErrorKind classify_http_status(int status, std::string_view body) {
  if (status == 408 || status == 429 || status >= 500) return GatewayErrorKind::transport;
  if (mentions_context_length(body)) return GatewayErrorKind::context_length;
  return GatewayErrorKind::rejected;
}

ResponseTrace HttpGateway::complete(const CompletionRequest& request) {
  const std::string body = build_request_body(request, endpoint_.model).dump();
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  std::string last_error;
  for (int attempt = 1; attempt <= endpoint_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      auto delay = endpoint_.retry.base_delay * (1 << std::min(attempt - 2, 16));
      delay = std::min(delay, endpoint_.retry.max_delay);
      const auto jittered = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(delay.count()) * jitter_factor(endpoint_.retry.jitter)));
      spdlog::debug("retrying {} in {} ms (attempt {}): {}", path_, jittered.count(), attempt, last_error);
      std::this_thread::sleep_for(jittered);
    }

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(endpoint_.connect_timeout);
    client.set_read_timeout(endpoint_.read_timeout);
    client.set_write_timeout(endpoint_.read_timeout);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    const int status = res->status;
    if (status == 200) return parse_completion_response(res->body, profile_);
    const auto kind = classify_http_status(status, res->body);
    if (kind == GatewayErrorKind::transport) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    throw GatewayError(kind, "HTTP " + std::to_string(status) + ": " + res->body);
  }
  throw GatewayError(GatewayErrorKind::transport,
                     "endpoint " + endpoint_.base_url + " failed after " +
                         std::to_string(endpoint_.retry.max_attempts) + " attempts: " + last_error);
}

}  // namespace thinkswitch
