#include "thinkswitch/mock.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

namespace thinkswitch {

using nlohmann::json;

FixtureError::FixtureError(std::string file, std::size_t line, const std::string& message)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + message), line_(line) {}

std::vector<std::string> mock_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; };
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && is_space(text[i])) ++i;
    while (i < text.size() && !is_space(text[i])) ++i;
    out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

bool request_thinks(const json& request) {
  if (auto ctk = request.find("chat_template_kwargs"); ctk != request.end() && ctk->is_object()) {
    if (auto e = ctk->find("enable_thinking"); e != ctk->end() && e->is_boolean()) return e->get<bool>();
    if (auto b = ctk->find("thinking_budget"); b != ctk->end() && b->is_number()) return b->get<double>() > 0;
  }
  if (auto r = request.find("reasoning_effort"); r != request.end() && r->is_string()) return r->get<std::string>() != "low";
  return true;
}

namespace {

std::optional<std::uint64_t> count_field(const json& request, const char* key) {
  auto it = request.find(key);
  if (it == request.end()) return std::nullopt;
  if (it->is_number_unsigned()) return it->get<std::uint64_t>();
  if (it->is_number_integer() && it->get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(it->get<std::int64_t>());
  return std::nullopt;
}

bool json_subset(const json& pattern, const json& value) {
  if (pattern.is_object()) {
    if (!value.is_object()) return false;
    for (auto it = pattern.begin(); it != pattern.end(); ++it) {
      auto v = value.find(it.key());
      if (v == value.end() || !json_subset(it.value(), *v)) return false;
    }
    return true;
  }
  return pattern == value;
}

std::string message_text(const json& request, std::string_view role) {
  std::string out;
  if (auto msgs = request.find("messages"); msgs != request.end() && msgs->is_array()) {
    for (const auto& m : *msgs) {
      if (m.is_object() && m.value("role", std::string()) == role && m.contains("content") && m["content"].is_string()) {
        out = m["content"].get<std::string>();
      }
    }
  }
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string join_pieces(const std::vector<std::string>& pieces, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < std::min(n, pieces.size()); ++i) out += pieces[i];
  return out;
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const char* what) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw std::invalid_argument(std::string("unknown ") + what + " field \"" + it.key() + "\"");
    }
  }
}

double finite(const json& v, const char* what) {
  if (!v.is_number()) throw std::invalid_argument(std::string(what) + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw std::invalid_argument(std::string(what) + " must be finite");
  return d;
}

}  // namespace

ScriptReply parse_reply(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("reply must be an object");
  check_keys(j,
             {"thinking", "answer", "usage", "report_split", "inline_thinking", "think_open", "think_close", "logprobs",
              "uncertain_at", "confident_logprob", "status", "error"},
             "reply");
  ScriptReply r;
  r.thinking = j.value("thinking", std::string());
  r.answer = j.value("answer", std::string());
  if (auto u = j.find("usage"); u != j.end()) {
    if (!u->is_object()) throw std::invalid_argument("usage must be an object");
    check_keys(*u, {"thinking", "answer"}, "usage");
    if (u->contains("thinking")) r.thinking_tokens = u->at("thinking").get<TokenCount>();
    if (u->contains("answer")) r.answer_tokens = u->at("answer").get<TokenCount>();
  }
  r.report_split = j.value("report_split", true);
  r.inline_thinking = j.value("inline_thinking", false);
  r.think_open = j.value("think_open", r.think_open);
  r.think_close = j.value("think_close", r.think_close);
  if (auto lp = j.find("logprobs"); lp != j.end() && !lp->is_null()) {
    if (lp->is_boolean()) {
      r.logprobs_available = lp->get<bool>();
    } else if (lp->is_array()) {
      std::vector<ScriptToken> table;
      for (const auto& e : *lp) {
        if (!e.is_object()) throw std::invalid_argument("logprob entries must be objects");
        check_keys(e, {"token", "logprob", "top"}, "logprob entry");
        ScriptToken t;
        t.token = e.at("token").get<std::string>();
        if (auto top = e.find("top"); top != e.end()) {
          for (const auto& c : *top) {
            if (!c.is_array() || c.size() != 2) throw std::invalid_argument("top entries must be [token, logprob]");
            t.top.push_back({c[0].get<std::string>(), finite(c[1], "candidate logprob")});
          }
        }
        if (e.contains("logprob")) {
          t.logprob = finite(e["logprob"], "logprob");
        } else if (!t.top.empty()) {
          t.logprob = std::max_element(t.top.begin(), t.top.end(), [](auto& a, auto& b) { return a.logprob < b.logprob; })
                          ->logprob;
        }
        if (t.top.empty()) t.top.push_back({t.token, t.logprob});
        table.push_back(std::move(t));
      }
      r.logprobs = std::move(table);
    } else {
      throw std::invalid_argument("logprobs must be an array, a boolean or null");
    }
  }
  if (auto ua = j.find("uncertain_at"); ua != j.end()) r.uncertain_at = ua->get<std::vector<std::size_t>>();
  if (auto c = j.find("confident_logprob"); c != j.end()) {
    r.confident_logprob = finite(*c, "confident_logprob");
    if (r.confident_logprob > 0) throw std::invalid_argument("confident_logprob must be <= 0");
  }
  r.status = j.value("status", 200);
  if (auto e = j.find("error"); e != j.end()) r.error = *e;
  return r;
}

std::optional<std::size_t> MockScript::find(const json& request) const {
  const std::string user = message_text(request, "user");
  const std::string system = message_text(request, "system");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& m = entries[i].match;
    if (m.contains && user.find(*m.contains) == std::string::npos) continue;
    if (m.system_contains && system.find(*m.system_contains) == std::string::npos) continue;
    if (m.thinking && request_thinks(request) != *m.thinking) continue;
    if (!m.params.empty() && !json_subset(m.params, request)) continue;
    return i;
  }
  return std::nullopt;
}

MockResponse MockScript::respond(const json& request) const {
  MockResponse out;
  out.entry = find(request);
  std::uint64_t seed = 0;
  if (auto s = count_field(request, "seed")) seed = *s;
  const ScriptReply* reply = &default_reply;
  if (out.entry) {
    const auto& e = entries[*out.entry];
    reply = &e.replies[seed % e.replies.size()];
    out.latency = e.latency;
  } else {
    spdlog::info("mock: no script entry matched; serving the default reply");
  }

  out.status = reply->status;
  if (reply->status != 200 || !reply->error.is_null()) {
    json err = reply->error.is_null() ? json{{"message", fmt::format("scripted status {}", reply->status)}}
                                      : reply->error;
    out.body = json{{"error", err}}.dump();
    return out;
  }

  const auto think_pieces = mock_tokenize(reply->thinking);
  const auto answer_pieces = mock_tokenize(reply->answer);
  TokenCount thinking = reply->thinking_tokens.value_or(think_pieces.size());
  TokenCount answer = reply->answer_tokens.value_or(answer_pieces.size());
  std::string thinking_text = reply->thinking;
  std::string answer_text = reply->answer;
  std::string finish = "stop";

  TokenCount max_tokens = std::numeric_limits<TokenCount>::max();
  if (auto mt = count_field(request, "max_tokens")) {
    max_tokens = static_cast<TokenCount>(*mt);
  }
  if (thinking + answer > max_tokens) {
    finish = "length";
    const TokenCount kept_thinking = std::min(thinking, max_tokens);
    const TokenCount kept_answer = max_tokens - kept_thinking;
    if (kept_thinking < thinking) thinking_text = join_pieces(think_pieces, kept_thinking);
    if (kept_answer < answer) answer_text = join_pieces(answer_pieces, kept_answer);
    thinking = kept_thinking;
    answer = kept_answer;
  }
  const TokenCount total = thinking + answer;

  json message{{"role", "assistant"}};
  if (reply->inline_thinking) {
    message["content"] = thinking_text.empty() && thinking == 0
                             ? answer_text
                             : reply->think_open + thinking_text + reply->think_close + "\n\n" + answer_text;
  } else {
    message["content"] = answer_text;
    if (!thinking_text.empty()) message["reasoning_content"] = thinking_text;
  }

  json choice{{"index", 0}, {"message", message}, {"finish_reason", finish}};
  if (request.value("logprobs", false) && reply->logprobs_available) {
    const std::size_t k = std::max<std::size_t>(1, count_field(request, "top_logprobs").value_or(1));
    json content = json::array();
    if (reply->logprobs) {
      for (std::size_t i = 0; i < std::min<std::size_t>(total, reply->logprobs->size()); ++i) {
        const auto& t = (*reply->logprobs)[i];
        json top = json::array();
        for (std::size_t c = 0; c < std::min(k, t.top.size()); ++c) {
          top.push_back({{"token", t.top[c].token}, {"logprob", t.top[c].logprob}});
        }
        content.push_back({{"token", t.token}, {"logprob", t.logprob}, {"top_logprobs", top}});
      }
    } else {
      std::vector<std::string> pieces = mock_tokenize(thinking_text);
      auto ap = mock_tokenize(answer_text);
      pieces.insert(pieces.end(), ap.begin(), ap.end());
      const std::set<std::size_t> uncertain(reply->uncertain_at.begin(), reply->uncertain_at.end());
      for (std::size_t i = 0; i < total; ++i) {
        const std::string tok = i < pieces.size() ? pieces[i] : std::string();
        json top = json::array();
        double lp = reply->confident_logprob;
        if (uncertain.count(i)) {
          lp = -std::log(static_cast<double>(k));
          for (std::size_t c = 0; c < k; ++c) top.push_back({{"token", c == 0 ? tok : fmt::format("alt{}", c)}, {"logprob", lp}});
        } else {
          top.push_back({{"token", tok}, {"logprob", lp}});
          for (std::size_t c = 1; c < k; ++c) top.push_back({{"token", fmt::format("alt{}", c)}, {"logprob", -20.0}});
        }
        content.push_back({{"token", tok}, {"logprob", lp}, {"top_logprobs", top}});
      }
    }
    choice["logprobs"] = json{{"content", content}};
  }

  TokenCount prompt_tokens = mock_tokenize(message_text(request, "system")).size() +
                             mock_tokenize(message_text(request, "user")).size();
  json usage{{"prompt_tokens", prompt_tokens}, {"completion_tokens", total}, {"total_tokens", prompt_tokens + total}};
  if (reply->report_split) usage["completion_tokens_details"] = json{{"reasoning_tokens", thinking}};

  const std::string request_text = request.dump();
  out.body = json{{"id", fmt::format("chatcmpl-{:016x}", fnv1a(request_text))},
                  {"object", "chat.completion"},
                  {"created", 0},
                  {"model", request.value("model", std::string("mock"))},
                  {"choices", json::array({choice})},
                  {"usage", usage}}
                 .dump();
  return out;
}

MockScript parse_fixture(std::string_view text, const std::string& source) {
  MockScript script;
  script.default_reply.answer = "I don't know.";
  bool saw_default = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') continue;

    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FixtureError(source, line_no, "not a JSON object");
    try {
      if (j.contains("default")) {
        if (j.size() != 1) throw std::invalid_argument("a default line holds only \"default\"");
        if (saw_default) throw std::invalid_argument("duplicate default reply");
        script.default_reply = parse_reply(j["default"]);
        saw_default = true;
        continue;
      }
      check_keys(j, {"match", "reply", "replies", "latency_ms", "fail_first"}, "entry");
      ScriptEntry e;
      e.line = line_no;
      if (auto m = j.find("match"); m != j.end()) {
        if (!m->is_object()) throw std::invalid_argument("match must be an object");
        check_keys(*m, {"contains", "system_contains", "thinking", "params"}, "match");
        if (m->contains("contains")) e.match.contains = m->at("contains").get<std::string>();
        if (m->contains("system_contains")) e.match.system_contains = m->at("system_contains").get<std::string>();
        if (m->contains("thinking")) e.match.thinking = m->at("thinking").get<bool>();
        if (m->contains("params")) {
          e.match.params = m->at("params");
          if (!e.match.params.is_object()) throw std::invalid_argument("match.params must be an object");
        }
      }
      const bool one = j.contains("reply");
      const bool many = j.contains("replies");
      if (one == many) throw std::invalid_argument("entry needs exactly one of \"reply\" or \"replies\"");
      if (one) {
        e.replies.push_back(parse_reply(j["reply"]));
      } else {
        if (!j["replies"].is_array() || j["replies"].empty()) throw std::invalid_argument("replies must be a non-empty array");
        for (const auto& r : j["replies"]) e.replies.push_back(parse_reply(r));
      }
      const auto latency = j.value("latency_ms", 0);
      if (latency < 0) throw std::invalid_argument("latency_ms must be non-negative");
      e.latency = std::chrono::milliseconds(latency);
      const auto fail_first = j.value("fail_first", 0);
      if (fail_first < 0) throw std::invalid_argument("fail_first must be non-negative");
      e.fail_first = static_cast<std::size_t>(fail_first);
      script.entries.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw FixtureError(source, line_no, ex.what());
    }
  }
  return script;
}

MockScript script_from_fixture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FixtureError(path.string(), 0, "cannot open fixture");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_fixture(ss.str(), path.string());
}

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------

struct MockServer::Impl {
  httplib::Server server;
};

MockServer::MockServer(MockScript script)
    : impl_(std::make_unique<Impl>()), script_(std::move(script)), failures_served_(script_.entries.size(), 0) {
  // SO_REUSEADDR only; an occupied port must fail to bind.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  impl_->server.Post(R"(.*/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
    auto r = handle(req.body);
    if (r.latency.count() > 0) std::this_thread::sleep_for(r.latency);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  impl_->server.Get("/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
}

MockServer::~MockServer() { stop(); }

MockResponse MockServer::handle(const std::string& body) {
  json request = json::parse(body, nullptr, false);
  if (request.is_discarded() || !request.is_object()) {
    return MockResponse{400, json{{"error", {{"message", "request body is not a JSON object"}}}}.dump(), {}, {}};
  }
  std::optional<std::size_t> entry;
  {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    entry = script_.find(request);
    if (entry && failures_served_[*entry] < script_.entries[*entry].fail_first) {
      ++failures_served_[*entry];
      return MockResponse{503, json{{"error", {{"message", "scripted transient failure"}}}}.dump(), {}, entry};
    }
  }
  return script_.respond(request);
}

int MockServer::start(const std::string& host, int port) {
  if (thread_.joinable()) throw std::logic_error("mock server already started");
  host_ = host;
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    if (port_ <= 0) throw MockBindError("cannot bind any port on " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port)) throw MockBindError(fmt::format("cannot bind {}:{}", host, port));
    port_ = port;
  }
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void MockServer::stop() {
  if (thread_.joinable()) {
    impl_->server.stop();
    thread_.join();
  }
}

bool MockServer::running() const { return impl_->server.is_running(); }

std::string MockServer::base_url() const { return fmt::format("http://{}:{}/v1", host_, port_); }

std::size_t MockServer::request_count() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<json> MockServer::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

ResponseTrace ScriptBackend::complete(const CompletionRequest& request) {
  ++calls_;
  const auto body = build_request_body(request, profile_.model_name);
  auto r = script_.respond(body);
  if (r.status != 200) throw GatewayError(classify_http_status(r.status, r.body), "HTTP " + std::to_string(r.status) + ": " + r.body);
  return parse_completion_response(r.body, profile_);
}

}  // namespace thinkswitch
