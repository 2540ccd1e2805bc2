#include <doctest.h>

#include "support.hpp"
#include "thinkswitch/eval.hpp"
#include "thinkswitch/gateway.hpp"
#include "thinkswitch/strategies.hpp"

using namespace thinkswitch;
using nlohmann::json;

namespace {

struct Suite {
  MockScript script;
  std::vector<Query> queries;
};

Suite load_suite(const std::string& name) {
  return {script_from_fixture(testing::assets() / "fixtures" / (name + ".jsonl")),
          load_dataset(testing::assets() / "datasets" / (name + ".jsonl"))};
}

const Query& by_id(const std::vector<Query>& qs, const std::string& id) {
  for (const auto& q : qs) {
    if (q.id == id) return q;
  }
  throw std::runtime_error("no query " + id);
}

TokenCount pass_sum(const StrategyOutcome& o) {
  TokenCount s = 0;
  for (const auto& p : o.passes()) s += p.trace.total_tokens;
  return s;
}

/// Mock server plus an HTTP gateway pointed at it.
struct Served {
  MockServer server;
  std::unique_ptr<HttpGateway> gateway;
  Served(MockScript script, const ModelProfile& profile) : server(std::move(script)) {
    server.start();
    EndpointConfig ep;
    ep.base_url = server.base_url();
    gateway = std::make_unique<HttpGateway>(ep, profile);
  }
};

}  // namespace

TEST_CASE("escalation fixture texts: only esc-4 carries lexicon words") {
  const auto script = script_from_fixture(testing::assets() / "fixtures" / "escalation_suite.jsonl");
  for (const auto& e : script.entries) {
    if (e.match.thinking != std::optional<bool>(false)) continue;
    const bool hedges = e.match.contains->find("primes") != std::string::npos;
    const auto& r = e.replies.front();
    CHECK(scan_triggers(r.thinking + "\n" + r.answer, testing::lexicon()).empty() == !hedges);
  }
}

TEST_CASE("full and no think issue one pass in the family's extreme modes") {
  auto suite = load_suite("escalation_suite");
  const auto& p = testing::profile("qwen3.5");
  ScriptBackend backend(suite.script, p);
  const auto ctx = make_context(backend, p, testing::prompts(), testing::lexicon());
  const auto& q = by_id(suite.queries, "esc-1");
  const auto ft = run_full_think(q, ctx);
  REQUIRE(ft.passes().size() == 1);
  CHECK(ft.passes()[0].mode == ThinkingMode::think());
  CHECK(ft.total_tokens() == 420);
  CHECK(ft.strategy_name() == "full_think");
  const auto nt = run_no_think(q, ctx);
  CHECK(nt.passes()[0].mode == ThinkingMode::no_think());
  CHECK(nt.final_answer() == "17 + 25 = 42. \\boxed{42}");
}

TEST_CASE("spec-trigger escalates exactly where the lexicon matches") {
  auto suite = load_suite("escalation_suite");
  const auto& p = testing::profile("qwen3.5");
  ScriptBackend backend(suite.script, p);
  const auto ctx = make_context(backend, p, testing::prompts(), testing::lexicon());
  for (const auto& q : suite.queries) {
    const auto o = run_spec_trigger(q, ctx);
    CHECK_FALSE(o.failed());
    const auto* ev = o.find_event("trigger_scan");
    REQUIRE(ev);
    const bool escalated = ev->detail["escalate"].get<bool>();
    CHECK(escalated == (q.id == "esc-4"));
    CHECK(o.passes().size() == (escalated ? 2u : 1u));
    CHECK(o.total_tokens() == pass_sum(o));
    if (escalated) {
      CHECK(o.passes()[1].role == "escalation");
      CHECK(o.passes()[1].mode == ThinkingMode::think());
      CHECK(o.total_tokens() == 1700 + 9100);
      CHECK(ev->detail["matches"] == json::array({"wait"}));
      CHECK(o.final_answer().find("Wait") == std::string::npos);
    }
  }
}

TEST_CASE("spec-entropy escalates exactly on the high-entropy problem") {
  auto suite = load_suite("escalation_suite");
  for (const char* name : {"qwen3.5", "gpt-oss", "seed-oss"}) {
    const auto& p = testing::profile(name);
    ScriptBackend backend(suite.script, p);
    const auto ctx = make_context(backend, p, testing::prompts(), testing::lexicon());
    for (const auto& q : suite.queries) {
      const auto o = run_spec_entropy(q, ctx);
      REQUIRE_FALSE(o.failed());
      const auto* ev = o.find_event("entropy");
      REQUIRE(ev);
      const bool escalated = ev->detail["escalate"].get<bool>();
      CHECK(escalated == (q.id == "esc-5"));
      CHECK(ev->detail["threshold"].get<double>() == doctest::Approx(p.entropy_threshold));
      CHECK(o.total_tokens() == pass_sum(o));
      if (escalated) {
        CHECK(ev->detail["above_threshold"] == 3);
        CHECK(o.passes()[1].mode == full_think_mode(p));
        CHECK(o.total_tokens() == o.passes()[0].trace.total_tokens + 420);
      }
    }
  }
}

TEST_CASE("spec-entropy without logprobs is a capability failure") {
  auto script = parse_fixture(R"({"match": {}, "reply": {"answer": "x \\boxed{1}", "logprobs": false}})");
  const auto& p = testing::profile("qwen3.5");
  ScriptBackend backend(script, p);
  const auto ctx = make_context(backend, p, testing::prompts(), testing::lexicon());
  const auto o = run_spec_entropy(Query{"q", Domain::math, "1?", "1", nullptr}, ctx);
  REQUIRE(o.failed());
  CHECK(o.error()->kind == "capability");
  CHECK(o.passes().size() == 1);
}

TEST_CASE("routing follows the judge and falls back on a malformed reply") {
  auto suite = load_suite("routing_suite");
  const auto& p = testing::profile("qwen3.5");
  Served served(suite.script, p);
  const auto ctx = make_context(*served.gateway, p, testing::prompts(), testing::lexicon());

  const std::map<std::string, std::pair<ThinkingMode, TokenCount>> expected{
      {"rt-1", {ThinkingMode::think(), 3015}},
      {"rt-2", {ThinkingMode::no_think(), 15}},
      {"rt-3", {ThinkingMode::think_with_budget(2048), 915}},
      {"rt-4", {ThinkingMode::think(), 3015}},
  };
  for (const auto& q : suite.queries) {
    const auto before = served.server.request_count();
    const auto o = run_routing(q, ctx);
    REQUIRE_FALSE(o.failed());
    REQUIRE(o.passes().size() == 2);
    CHECK(o.passes()[0].role == "judge");
    CHECK(o.passes()[0].mode == ThinkingMode::no_think());
    CHECK(o.passes()[1].role == "solve");
    CHECK(o.passes()[1].mode == expected.at(q.id).first);
    CHECK(o.passes()[1].trace.total_tokens == expected.at(q.id).second);
    CHECK(o.total_tokens() == pass_sum(o));
    const auto* ev = o.find_event("routing");
    REQUIRE(ev);
    CHECK(ev->detail["source"] == (q.id == "rt-4" ? "fallback" : "parsed"));

    const auto reqs = served.server.requests();
    REQUIRE(reqs.size() == before + 2);
    const auto& judge = reqs[before];
    CHECK(judge["max_tokens"] == 256);
    CHECK(judge["messages"][0]["content"] == "You are a problem difficulty classifier.");
    const auto& solve = reqs[before + 1];
    CHECK(solve["messages"][0]["content"] == "You are a helpful assistant. Solve the given problem carefully.");
    CHECK(solve["messages"][1]["content"] == render_user_message(q, testing::prompts()));
  }
}

TEST_CASE("prompt tuning sends the family prompt and labels the observed mode") {
  auto suite = load_suite("routing_suite");
  const auto& p = testing::profile("qwen3.5");
  Served served(suite.script, p);
  const auto ctx = make_context(*served.gateway, p, testing::prompts(), testing::lexicon());
  const auto& q = by_id(suite.queries, "rt-2");
  const auto o = run_prompt_tuning(q, ctx);
  REQUIRE(o.passes().size() == 1);
  const auto* ev = o.find_event("mode_label");
  REQUIRE(ev);
  CHECK(ev->detail["label"] == "think");
  CHECK(ev->detail["thinking_tokens"] == 3000);
  const auto req = served.server.requests().back();
  CHECK(req["messages"][0]["content"] == strategy_system_prompt("pt", p.family, testing::prompts()));
  CHECK(req["messages"][1]["content"] == render_pt_user_message(q, testing::prompts()));
}

TEST_CASE("budget-aware needs the effort family") {
  auto script = parse_fixture(R"({"match": {}, "reply": {"answer": "\\boxed{1}"}})");
  const Query q{"q", Domain::math, "1?", "1", nullptr};
  {
    const auto& p = testing::profile("qwen3.5");
    ScriptBackend backend(script, p);
    const auto o = run_budget_aware(q, make_context(backend, p, testing::prompts(), testing::lexicon()),
                                    EffortLevel::medium);
    REQUIRE(o.failed());
    CHECK(o.error()->kind == "capability");
    CHECK(backend.calls() == 0);
  }
  {
    const auto& p = testing::profile("gpt-oss");
    Served served(script, p);
    const auto o = run_budget_aware(q, make_context(*served.gateway, p, testing::prompts(), testing::lexicon()),
                                    EffortLevel::medium);
    CHECK_FALSE(o.failed());
    CHECK(served.server.requests().back()["reasoning_effort"] == "medium");
    CHECK(o.strategy_name() == "budget_aware_medium");
  }
}

TEST_CASE("generation settings reach the request") {
  auto script = parse_fixture(R"({"match": {}, "reply": {"answer": "\\boxed{1}"}})");
  const auto& p = testing::profile("seed-oss");
  Served served(script, p);
  GenerationSettings s;
  s.max_output_tokens = 1000;
  s.seed = 11;
  const auto ctx = make_context(*served.gateway, p, testing::prompts(), testing::lexicon(), s);
  run_full_think(Query{"q", Domain::math, "1?", "1", nullptr}, ctx);
  const auto req = served.server.requests().back();
  CHECK(req["max_tokens"] == 1000);
  CHECK(req["seed"] == 11);
  CHECK(req["temperature"] == 0.0);
  CHECK(req["chat_template_kwargs"]["thinking_budget"] == 32768);
}

TEST_CASE("gateway errors become failed outcomes with the error kind") {
  auto script = parse_fixture(R"({"match": {}, "reply": {"status": 400, "error": {"message": "bad"}}})");
  const auto& p = testing::profile("qwen3.5");
  ScriptBackend backend(script, p);
  const auto ctx = make_context(backend, p, testing::prompts(), testing::lexicon());
  const auto o = run_spec_trigger(Query{"q", Domain::math, "1?", "1", nullptr}, ctx);
  REQUIRE(o.failed());
  CHECK(o.error()->kind == "rejected");
  CHECK(o.passes().empty());
  CHECK(o.total_tokens() == 0);
}
