#include <doctest.h>

#include <random>

#include "support.hpp"
#include "thinkswitch/core.hpp"
#include "thinkswitch/gateway.hpp"
#include "thinkswitch/strategies.hpp"

using namespace thinkswitch;
using nlohmann::json;

TEST_CASE("mode labels round trip") {
  const std::vector<ThinkingMode> modes{ThinkingMode::think(),
                                        ThinkingMode::no_think(),
                                        ThinkingMode::think_with_budget(1024),
                                        ThinkingMode::effort(EffortLevel::low),
                                        ThinkingMode::effort(EffortLevel::medium),
                                        ThinkingMode::effort(EffortLevel::high),
                                        ThinkingMode::budget(0),
                                        ThinkingMode::budget(4096)};
  for (const auto& m : modes) {
    CHECK(ThinkingMode::parse_label(m.label()) == m);
    CHECK(json(m).get<ThinkingMode>() == m);
  }
  CHECK(ThinkingMode::think_with_budget(1024).label() == "think@1024");
  CHECK(ThinkingMode::effort(EffortLevel::high).label() == "effort:high");
  CHECK(ThinkingMode::budget(512).label() == "budget:512");
  CHECK_THROWS_AS(ThinkingMode::parse_label("effort:extreme"), SchemaError);
  CHECK_THROWS_AS(ThinkingMode::parse_label("ponder"), SchemaError);
  CHECK_THROWS_AS(json({{"kind", "vibes"}}).get<ThinkingMode>(), SchemaError);
}

TEST_CASE("validate_mode checks family and budget range") {
  const auto& qwen = testing::profile("qwen3.5");
  const auto& gpt = testing::profile("gpt-oss");
  const auto& seed = testing::profile("seed-oss");
  CHECK(validate_mode(ThinkingMode::think(), qwen));
  CHECK(validate_mode(ThinkingMode::think_with_budget(2048), qwen));
  CHECK_FALSE(validate_mode(ThinkingMode::think_with_budget(qwen.max_output_tokens + 1), qwen));
  CHECK_FALSE(validate_mode(ThinkingMode::effort(EffortLevel::high), qwen));
  CHECK(validate_mode(ThinkingMode::effort(EffortLevel::low), gpt));
  CHECK_FALSE(validate_mode(ThinkingMode::budget(100), gpt));
  CHECK(validate_mode(ThinkingMode::budget(0), seed));
  CHECK(validate_mode(ThinkingMode::budget(seed.max_output_tokens), seed));
  CHECK_FALSE(validate_mode(ThinkingMode::budget(seed.max_output_tokens + 1), seed));
  CHECK_FALSE(validate_mode(ThinkingMode::no_think(), seed));
}

TEST_CASE("full and minimal modes per family") {
  CHECK(full_think_mode(testing::profile("qwen3.5")) == ThinkingMode::think());
  CHECK(minimal_mode(testing::profile("qwen3.5")) == ThinkingMode::no_think());
  CHECK(full_think_mode(testing::profile("gpt-oss")) == ThinkingMode::effort(EffortLevel::high));
  CHECK(minimal_mode(testing::profile("gpt-oss")) == ThinkingMode::effort(EffortLevel::low));
  CHECK(full_think_mode(testing::profile("seed-oss")) == ThinkingMode::budget(32768));
  CHECK(minimal_mode(testing::profile("seed-oss")) == ThinkingMode::budget(0));
}

TEST_CASE("map_mode writes the family extension fields") {
  const auto& qwen = testing::profile("qwen3.5");
  CHECK(map_mode(qwen, ThinkingMode::think()).fields == json{{"chat_template_kwargs", {{"enable_thinking", true}}}});
  CHECK(map_mode(qwen, ThinkingMode::no_think()).fields == json{{"chat_template_kwargs", {{"enable_thinking", false}}}});
  CHECK(map_mode(qwen, ThinkingMode::think_with_budget(2048)).fields ==
        json{{"chat_template_kwargs", {{"enable_thinking", true}}}, {"thinking_budget", 2048}});

  const auto& gpt = testing::profile("gpt-oss");
  CHECK(map_mode(gpt, ThinkingMode::effort(EffortLevel::medium)).fields == json{{"reasoning_effort", "medium"}});

  const auto& seed = testing::profile("seed-oss");
  CHECK(map_mode(seed, ThinkingMode::budget(512)).fields == json{{"chat_template_kwargs", {{"thinking_budget", 512}}}});

  try {
    map_mode(gpt, ThinkingMode::think());
    FAIL("expected a mode mismatch");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == GatewayErrorKind::mode_mismatch);
    CHECK(std::string(e.what()).find("binary") != std::string::npos);
    CHECK(std::string(e.what()).find("effort") != std::string::npos);
  }
}

TEST_CASE("request body carries messages, sampling and mode fields") {
  auto req = CompletionRequest::for_mode(testing::profile("qwen3.5"), ThinkingMode::no_think(), "sys", "hello");
  req.seed = 9;
  req.want_logprobs = true;
  const auto body = build_request_body(req, "m");
  CHECK(body["model"] == "m");
  CHECK(body["messages"].size() == 2);
  CHECK(body["messages"][0] == json{{"role", "system"}, {"content", "sys"}});
  CHECK(body["messages"][1] == json{{"role", "user"}, {"content", "hello"}});
  CHECK(body["max_tokens"] == 32768);
  CHECK(body["temperature"] == 0.0);
  CHECK(body["seed"] == 9);
  CHECK(body["logprobs"] == true);
  CHECK(body["top_logprobs"] == 20);
  CHECK(body["chat_template_kwargs"]["enable_thinking"] == false);

  req.system_prompt.reset();
  CHECK(build_request_body(req, "m")["messages"].size() == 1);
}

TEST_CASE("outcome totals equal the sum of pass totals") {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 300; ++iter) {
    OutcomeBuilder b("q", "s");
    TokenCount sum = 0;
    const int passes = static_cast<int>(rng() % 5);
    for (int i = 0; i < passes; ++i) {
      ResponseTrace t;
      t.thinking_tokens = rng() % 5000;
      t.answer_tokens = rng() % 500;
      t.total_tokens = t.thinking_tokens + t.answer_tokens;
      t.answer_text = "answer " + std::to_string(i);
      sum += t.total_tokens;
      b.add_pass("solve", ThinkingMode::think(), t);
    }
    const auto o = std::move(b).build();
    CHECK(o.total_tokens() == sum);
    if (passes > 0) CHECK(o.final_answer() == "answer " + std::to_string(passes - 1));
    CHECK(json(o).get<StrategyOutcome>() == o);
  }
}

TEST_CASE("select_pass changes the final answer but not the total") {
  OutcomeBuilder b("q", "s");
  ResponseTrace a;
  a.answer_text = "first";
  a.total_tokens = 10;
  ResponseTrace c;
  c.answer_text = "second";
  c.total_tokens = 20;
  b.add_pass("sample", ThinkingMode::think(), a).add_pass("sample", ThinkingMode::think(), c).select_pass(0);
  const auto o = std::move(b).build();
  CHECK(o.final_answer() == "first");
  CHECK(o.final_pass() == 0u);
  CHECK(o.total_tokens() == 30);
}

TEST_CASE("failed outcomes keep their passes and error") {
  OutcomeBuilder b("q", "s");
  ResponseTrace t;
  t.total_tokens = 12;
  b.add_pass("fast", ThinkingMode::no_think(), t).fail("capability", "no logprobs");
  const auto o = std::move(b).build();
  REQUIRE(o.failed());
  CHECK(o.error()->kind == "capability");
  CHECK(o.total_tokens() == 12);
  CHECK(json(o).get<StrategyOutcome>() == o);
}

TEST_CASE("classify_mode boundaries") {
  CHECK(classify_mode(0) == ModeLabel::nothink);
  CHECK(classify_mode(9) == ModeLabel::nothink);
  CHECK(classify_mode(10) == ModeLabel::brief_think);
  CHECK(classify_mode(100) == ModeLabel::brief_think);
  CHECK(classify_mode(101) == ModeLabel::think);
}

TEST_CASE("profile registry rejects unknown names with the known list") {
  try {
    testing::profiles().get("llama");
    FAIL("expected an error");
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("qwen3.5") != std::string::npos);
    CHECK(msg.find("gpt-oss") != std::string::npos);
  }
  CHECK(testing::profile("qwen3.5").entropy_threshold == doctest::Approx(0.10));
  CHECK(testing::profile("gpt-oss").entropy_threshold == doctest::Approx(0.08));
  CHECK(testing::profile("seed-oss").entropy_threshold == doctest::Approx(0.06));
  for (const auto& name : testing::profiles().names()) CHECK(testing::profile(name).logprob_k == 20u);
}
