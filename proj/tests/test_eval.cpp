#include <doctest.h>

#include "support.hpp"
#include "thinkswitch/answers.hpp"
#include "thinkswitch/eval.hpp"
#include "thinkswitch/mock.hpp"
#include "thinkswitch/strategies.hpp"

using namespace thinkswitch;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

Query math(std::string ref) { return Query{"m", Domain::math, "Compute it.", std::move(ref), nullptr}; }
Query science(std::string ref) { return Query{"s", Domain::science, "Which one?", std::move(ref), nullptr}; }
const Query kCode{"c", Domain::code, "Print 42.", "", json{{"tests", 3}}};

// Judge that accepts exactly the responses containing "half".
MockScript judge_script() {
  return parse_fixture(
      R"({"match": {"system_contains": "expert evaluator", "contains": "half"}, "reply": {"answer": "{\"correct\": true}"}})"
      "\n"
      R"({"match": {"system_contains": "expert evaluator", "contains": "broken"}, "reply": {"status": 500}})"
      "\n"
      R"({"match": {"system_contains": "expert evaluator"}, "reply": {"answer": "{\"correct\": false}"}})"
      "\n");
}

struct Judge {
  MockScript script = judge_script();
  const ModelProfile& profile = testing::profile("qwen3.5");
  ScriptBackend backend{script, profile};
  GraderConfig config() { return GraderConfig{JudgeEndpoint{&backend, &profile, &testing::prompts()}, {}, 60000ms}; }
};

}  // namespace

TEST_CASE("dataset loading and errors carry file and line") {
  const auto qs = load_dataset(testing::assets() / "datasets" / "routing_suite.jsonl");
  REQUIRE(qs.size() == 4);
  CHECK(qs[1].id == "rt-2");
  CHECK(qs[1].reference == "4");
  CHECK(dataset_name("x/y/MATH500.jsonl") == "MATH500");

  const auto ok = parse_dataset("\n{\"id\": \"a\", \"domain\": \"code\", \"problem\": \"p\", \"grader_payload\": {\"t\": 1}}\n\n");
  REQUIRE(ok.size() == 1);
  CHECK(ok[0].grader_payload == json{{"t", 1}});
  CHECK(ok[0].reference.empty());

  struct Bad {
    const char* text;
    std::size_t line;
  };
  for (const auto& b : {Bad{"{\"id\": \"a\", \"domain\": \"math\", \"problem\": \"p\"}\nnot json", 2},
                        Bad{"{\"id\": \"a\", \"domain\": \"poetry\", \"problem\": \"p\"}", 1},
                        Bad{"{\"id\": \"a\", \"domain\": \"math\"}", 1},
                        Bad{"{\"id\": \"\", \"domain\": \"math\", \"problem\": \"p\"}", 1},
                        Bad{"{\"id\": \"a\", \"domain\": \"math\", \"problem\": \"p\", \"reference\": 3}", 1},
                        Bad{"{\"id\": \"a\", \"domain\": \"math\", \"problem\": \"p\"}\n\n{\"id\": \"a\", \"domain\": "
                            "\"math\", \"problem\": \"q\"}",
                            3}}) {
    try {
      parse_dataset(b.text, "set.jsonl");
      FAIL("expected DatasetError for " << b.text);
    } catch (const DatasetError& e) {
      CHECK(e.line() == b.line);
      CHECK(e.file() == "set.jsonl");
    }
  }
  CHECK_THROWS_AS(load_dataset("/nonexistent/set.jsonl"), DatasetError);
}

TEST_CASE("boxed extraction and normalisation") {
  CHECK(extract_boxed("a \\boxed{1} then \\boxed{\\frac{1}{2}}") == std::optional<std::string>("\\frac{1}{2}"));
  CHECK(extract_boxed("\\fbox{7}") == std::optional<std::string>("7"));
  CHECK_FALSE(extract_boxed("\\boxed{unbalanced"));
  CHECK_FALSE(extract_boxed("no box"));
  CHECK(normalize_math_answer(" $\\left( 1, 2 \\right)$. ") == "(1,2)");
  CHECK(normalize_math_answer("\\text{ 5 }") == "5");
  CHECK(normalize_math_answer("+3") == "3");
}

TEST_CASE("option letters") {
  CHECK(extract_option_letter("The answer is (C).") == std::optional<char>('C'));
  CHECK(extract_option_letter("Answer: B") == std::optional<char>('B'));
  CHECK(extract_option_letter("I first thought A, but the answer is D") == std::optional<char>('D'));
  CHECK(extract_option_letter("\\boxed{E}") == std::optional<char>('E'));
  CHECK(extract_option_letter("B") == std::optional<char>('B'));
}

TEST_CASE("rule-based grading") {
  CHECK(grade_rule_based(math("42"), "so \\boxed{42}") == std::optional<bool>(true));
  CHECK(grade_rule_based(math("0.5"), "\\boxed{0.50}") == std::optional<bool>(true));
  CHECK(grade_rule_based(math("12"), "\\boxed{13}") == std::optional<bool>(false));
  CHECK(grade_rule_based(math("\\frac{1}{2}"), "\\boxed{\\frac12}") == std::nullopt);
  CHECK(grade_rule_based(math("7"), "seven") == std::nullopt);
  CHECK(grade_rule_based(math("\\sqrt{2}"), "\\boxed{ \\sqrt{2} }") == std::optional<bool>(true));
  CHECK(grade_rule_based(science("B"), "The answer is (B)") == std::optional<bool>(true));
  CHECK(grade_rule_based(science("B"), "Answer: C") == std::optional<bool>(false));
  CHECK(grade_rule_based(kCode, "print(42)") == std::nullopt);
}

TEST_CASE("judge verdict parsing") {
  CHECK(parse_judge_verdict(R"({"correct": true})"));
  CHECK(parse_judge_verdict(R"(Sure: {"correct": true} ok)"));
  CHECK_FALSE(parse_judge_verdict(R"({"correct": false})"));
  CHECK_FALSE(parse_judge_verdict(R"({"correct": "true"})"));
  CHECK_FALSE(parse_judge_verdict("yes"));
  CHECK_FALSE(parse_judge_verdict(R"({"correct": tru)"));
}

TEST_CASE("grading cascade") {
  Judge j;
  auto cfg = j.config();

  auto g = grade_response(math("42"), "\\boxed{42}", cfg);
  CHECK(g.correct);
  CHECK(g.method == "rule");
  CHECK(j.backend.calls() == 0);

  g = grade_response(math("0.5"), "it is a half \\boxed{1/2}", cfg);
  CHECK(g.correct);
  CHECK(g.method == "judge");
  CHECK(j.backend.calls() == 1);

  g = grade_response(math("5"), "\\boxed{6}", cfg);
  CHECK_FALSE(g.correct);
  CHECK(g.method == "judge");

  g = grade_response(science("B"), "Answer: C", cfg);
  CHECK_FALSE(g.correct);
  CHECK(g.method == "rule");
  const auto calls = j.backend.calls();
  g = grade_response(science("B"), "I think it's half-life related", cfg);
  CHECK(g.method == "judge");
  CHECK(j.backend.calls() == calls + 1);

  g = grade_response(math("1"), "broken \\boxed{x}", cfg);
  CHECK(g.failed);
  CHECK_FALSE(g.correct);

  g = grade_response(math("1"), "nothing", GraderConfig{});
  CHECK(g.method == "none");
  CHECK_FALSE(g.correct);
  g = grade_response(kCode, "print(42)", GraderConfig{});
  CHECK(g.method == "none");
  CHECK(grade_response(kCode, "half", cfg).method == "judge");
}

TEST_CASE("judge requests use the judge prompt and a short budget") {
  MockServer server(judge_script());
  server.start();
  EndpointConfig ep;
  ep.base_url = server.base_url();
  const auto& p = testing::profile("gpt-oss");
  HttpGateway gw(ep, p);
  CHECK(grade_llm_judge(math("0.5"), "0.5", "a half", JudgeEndpoint{&gw, &p, &testing::prompts()}));
  const auto req = server.requests().back();
  CHECK(req["max_tokens"] == 256);
  CHECK(req["reasoning_effort"] == "low");
  const auto expected = render_llm_judge(math("0.5"), "0.5", "a half", testing::prompts());
  CHECK(req["messages"][0]["content"] == expected.system);
  CHECK(req["messages"][1]["content"] == expected.user);
}

TEST_CASE("external grader statuses") {
  CHECK(grade_external(kCode, "x", "true", 5000ms).status == ExternalStatus::passed);
  const auto f = grade_external(kCode, "x", "exit 3", 5000ms);
  CHECK(f.status == ExternalStatus::failed_check);
  CHECK(f.exit_code == 3);
  CHECK(grade_external(kCode, "x", "no-such-grader-command-here", 5000ms).status == ExternalStatus::spawn_failure);

  const auto start = std::chrono::steady_clock::now();
  CHECK(grade_external(kCode, "x", "sleep 10", 200ms).status == ExternalStatus::timeout);
  CHECK(std::chrono::steady_clock::now() - start < 5s);

  CHECK(grade_external(kCode, "print(42)", R"x(grep -q '"response":"print(42)"')x", 5000ms).correct());
  CHECK(grade_external(kCode, "print(42)", R"x(grep -q '"grader_payload":{"tests":3}')x", 5000ms).correct());
  CHECK_FALSE(grade_external(kCode, "print(41)", R"x(grep -q '"response":"print(42)"')x", 5000ms).correct());
  // A grader that ignores its input must not stall on a large document.
  CHECK(grade_external(kCode, std::string(1 << 20, 'x'), "true", 5000ms).correct());
}

TEST_CASE("external grading inside the cascade") {
  GraderConfig cfg;
  cfg.external_command = "grep -q 42";
  auto g = grade_response(kCode, "print(42)", cfg);
  CHECK(g.correct);
  CHECK(g.method == "external");
  CHECK(g.note == "passed");
  cfg.external_command = "no-such-grader-command-here";
  g = grade_response(kCode, "print(42)", cfg);
  CHECK(g.failed);
  CHECK(g.note == "spawn_failure");
}

TEST_CASE("results round-trip and failed outcomes are incorrect") {
  const auto script = parse_fixture(
      R"({"match": {"contains": "2 + 2"}, "reply": {"thinking": "two and two", "answer": "\\boxed{4}"}})"
      "\n"
      R"({"match": {}, "reply": {"status": 400}})");
  const auto& p = testing::profile("qwen3.5");
  ScriptBackend backend(script, p);
  const auto ctx = make_context(backend, p, testing::prompts(), testing::lexicon());
  const auto qs = load_dataset(testing::assets() / "datasets" / "routing_suite.jsonl");

  std::vector<EvalResult> results;
  for (const auto& q : qs) results.push_back(make_result(q, "routing_suite", run_full_think(q, ctx), GraderConfig{}));
  CHECK(results[1].record.correct);
  CHECK(results[1].record.total_tokens == 4);
  CHECK_FALSE(results[0].record.correct);
  CHECK(results[0].record.failed);
  CHECK(results[0].grade.note == "strategy failed");

  testing::TempDir dir;
  write_results(results, dir / "a" / "full_think.routing_suite.jsonl");
  const auto back = read_results(dir / "a" / "full_think.routing_suite.jsonl");
  REQUIRE(back.size() == results.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].record == results[i].record);
    CHECK(back[i].outcome == results[i].outcome);
    CHECK(back[i].grade.method == results[i].grade.method);
  }

  write_results({results[1]}, dir / "a" / "0.jsonl");
  testing::write_file(dir / "a" / "notes.txt", "ignored");
  const auto all = read_results_dir(dir / "a");
  REQUIRE(all.size() == 5);
  CHECK(all[0].record.query_id == "rt-2");

  testing::write_file(dir / "b" / "x.jsonl", result_to_json(results[1]).dump() + "\n{\"query_id\": 1}\n");
  try {
    read_results(dir / "b" / "x.jsonl");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("x.jsonl:2:") != std::string::npos);
  }
}
