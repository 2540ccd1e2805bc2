#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "support.hpp"
#include "thinkswitch/mock.hpp"
#include "thinkswitch/presets.hpp"

using namespace thinkswitch;
using nlohmann::json;

namespace {

std::string words(std::size_t n, std::size_t marker_at = SIZE_MAX, const std::string& marker = "Wait") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += i == marker_at ? marker : "step" + std::to_string(i);
  }
  return out;
}

MockScript script(std::initializer_list<json> entries) {
  std::string text;
  for (const auto& e : entries) text += e.dump() + "\n";
  return parse_fixture(text);
}

const Query kMath{"q1", Domain::math, "What is 3 + 4?", "7", nullptr};

struct Harness {
  MockScript script;
  const ModelProfile& profile;
  ScriptBackend backend;
  StrategyContext ctx;
  Harness(MockScript s, const char* profile_name, GenerationSettings settings = {})
      : script(std::move(s)),
        profile(testing::profile(profile_name)),
        backend(script, profile),
        ctx(make_context(backend, profile, testing::prompts(), testing::lexicon(), settings)) {}
  StrategyOutcome run(const std::string& name, const Query& q = kMath) {
    return run_strategy(name, q, ctx, testing::presets());
  }
};

TokenCount pass_sum(const StrategyOutcome& o) {
  TokenCount s = 0;
  for (const auto& p : o.passes()) s += p.trace.total_tokens;
  return s;
}

// Direct scoring, written out independently of the library.
std::size_t rasc_oracle(const std::vector<RascSample>& s, double wc, double wb) {
  TokenCount shortest = s[0].tokens;
  for (const auto& x : s) shortest = std::min(shortest, x.tokens);
  std::size_t best = 0;
  double best_score = -INFINITY;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t same = 0;
    for (const auto& y : s) same += y.answer_key == s[i].answer_key;
    const double brevity = s[i].tokens == 0 ? 1.0 : double(shortest) / double(s[i].tokens);
    const double score = wc * double(same) / double(s.size()) + wb * brevity;
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

std::optional<std::size_t> early_exit_oracle(const std::vector<TokenLogprobs>& toks, std::size_t thinking,
                                             const DeerParams& p) {
  const std::size_t limit = std::min(thinking, toks.size());
  for (std::size_t i = std::max<std::size_t>(p.min_thinking_tokens, 1); i < limit; ++i) {
    std::string rest;
    for (std::size_t j = i; j < limit; ++j) rest += toks[j].token;
    for (const auto& pat : p.patterns) {
      const std::size_t lead = pat[0] == '\n' ? 0 : std::min(rest.find_first_not_of(' '), rest.size());
      if (rest.compare(lead, pat.size(), pat) != 0) continue;
      const std::size_t begin = i > p.window ? i - p.window : 0;
      double sum = 0.0;
      for (std::size_t j = begin; j < i; ++j) {
        double best = toks[j].logprob;
        for (const auto& c : toks[j].top) best = std::max(best, c.logprob);
        sum += std::exp(best);
      }
      if (sum / double(i - begin) >= p.confidence_threshold) return i;
      break;
    }
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("rasc selection matches direct scoring") {
  std::mt19937_64 rng(8);
  const char* keys[] = {"7", "8", "9"};
  for (int iter = 0; iter < 2000; ++iter) {
    std::vector<RascSample> s(1 + rng() % 8);
    for (auto& x : s) x = {keys[rng() % 3], static_cast<TokenCount>(rng() % 50)};
    const double wc = (rng() % 11) / 10.0;
    CHECK(rasc_select(s, {wc, 1.0 - wc}) == rasc_oracle(s, wc, 1.0 - wc));
  }
  CHECK_THROWS(rasc_select({}, {}));
}

TEST_CASE("rasc ties go to the earliest sample") {
  const std::vector<RascSample> s{{"a", 10}, {"b", 10}, {"a", 10}, {"b", 10}};
  CHECK(rasc_select(s, {0.7, 0.3}) == 0);
  const std::vector<RascSample> t{{"a", 20}, {"a", 10}, {"b", 5}};
  // a@20: 0.7*2/3 + 0.3*0.25; a@10: 0.7*2/3 + 0.3*0.5; b@5: 0.7/3 + 0.3
  CHECK(rasc_select(t, {0.7, 0.3}) == 1);
}

TEST_CASE("modal agreement") {
  CHECK(modal_agreement({}) == 0.0);
  CHECK(modal_agreement({{"a", 1}, {"b", 1}, {"a", 1}}) == doctest::Approx(2.0 / 3.0));
  CHECK(modal_agreement({{"x", 1}}) == 1.0);
}

TEST_CASE("early exit matches a brute-force scan") {
  std::mt19937_64 rng(21);
  const std::vector<std::string> pieces{" a", " b", " Wait", " Hmm", "\n\n", " No,", "c"};
  DeerParams p;
  p.patterns = {"Wait", "Hmm", "No,", "\n\n"};
  for (int iter = 0; iter < 1500; ++iter) {
    p.min_thinking_tokens = rng() % 20;
    p.window = 1 + rng() % 10;
    p.confidence_threshold = 0.5 + (rng() % 50) / 100.0;
    std::vector<TokenLogprobs> toks(rng() % 60);
    for (auto& t : toks) {
      t.token = pieces[rng() % pieces.size()];
      t.logprob = -std::ldexp(1.0, -static_cast<int>(rng() % 8));
      t.top = {{t.token, t.logprob}, {"alt", -5.0}};
    }
    const std::size_t thinking = rng() % (toks.size() + 5);
    const auto got = find_early_exit(toks, thinking, p);
    const auto want = early_exit_oracle(toks, thinking, p);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(got->token_index == *want);
      CHECK(got->confidence >= p.confidence_threshold);
    }
  }
}

TEST_CASE("hdflow score counts length, symbols and keywords") {
  const auto& params = testing::presets().get("hdflow").params;
  CHECK(hdflow_score("What is the capital of France?", params) == 0);
  CHECK(hdflow_score("Prove that the sequence is bounded.", params) == 2);
  CHECK(hdflow_score("Find all integer solutions of the polynomial and the maximum.", params) == 2);
  CHECK(hdflow_score("x=y+z*w^2-$a$", params) == 1);
  CHECK(hdflow_score(words(130), params) == 1);
}

TEST_CASE("shipped presets load and unknown names list the known ones") {
  const auto& reg = testing::presets();
  for (const char* name : {"s1_low", "s1_high", "tale_ep", "budget_guidance_medium", "sot", "cod", "dynathink", "deer",
                           "rasc", "hdflow", "mixreasoning"}) {
    CHECK(reg.contains(name));
    CHECK(is_known_strategy(name, reg));
  }
  CHECK(is_known_strategy("spec_entropy", reg));
  CHECK_FALSE(is_known_strategy("deep_think", reg));
  try {
    reg.get("deep_think");
    FAIL("expected UnknownStrategyError");
  } catch (const UnknownStrategyError& e) {
    CHECK(std::string(e.what()).find("deep_think") != std::string::npos);
    CHECK(std::string(e.what()).find("rasc") != std::string::npos);
  }
  Harness h(script({{{"match", json::object()}, {"reply", {{"answer", "\\boxed{7}"}}}}}), "qwen3.5");
  CHECK_THROWS_AS(h.run("deep_think"), UnknownStrategyError);
  const auto names = strategy_names(reg);
  CHECK(names.front() == "full_think");
  CHECK(std::find(names.begin(), names.end(), "mixreasoning") != names.end());
}

TEST_CASE("preset file errors") {
  testing::TempDir dir;
  testing::write_file(dir / "bad.json", R"({"name": "x"})");
  CHECK_THROWS_AS(PresetRegistry::load(dir / "bad.json"), SchemaError);
  testing::write_file(dir / "bad2.json", R"([{"name": "x", "base_strategy": "s1", "params": 3}])");
  CHECK_THROWS_AS(PresetRegistry::load(dir / "bad2.json"), SchemaError);
  CHECK_THROWS_AS(PresetRegistry::load(dir / "missing.json"), SchemaError);

  PresetRegistry reg;
  reg.add({"odd", "telepathy", json::object()});
  Harness h(script({{{"match", json::object()}, {"reply", {{"answer", "\\boxed{7}"}}}}}), "qwen3.5");
  CHECK_THROWS_AS(run_preset(kMath, h.ctx, reg.get("odd")), UnknownStrategyError);
}

TEST_CASE("s1 budget forcing per family") {
  const auto fixture = script({{{"match", json::object()}, {"reply", {{"thinking", words(40)}, {"answer", "\\boxed{7}"}}}}});
  {
    Harness h(fixture, "qwen3.5");
    const auto o = h.run("s1_high");
    REQUIRE_FALSE(o.failed());
    CHECK(o.passes()[0].mode == ThinkingMode::think_with_budget(16384));
    CHECK(o.total_tokens() == 41);
  }
  {
    Harness h(fixture, "seed-oss");
    CHECK(h.run("s1_low").passes()[0].mode == ThinkingMode::budget(1024));
  }
  {
    Harness h(fixture, "gpt-oss");
    const auto o = h.run("s1_medium");
    REQUIRE(o.failed());
    CHECK(o.error()->kind == "capability");
    CHECK(h.backend.calls() == 0);
  }
}

TEST_CASE("tale estimates difficulty then solves under the stated budget") {
  auto fixture = script({
      {{"match", {{"system_contains", "estimate how many"}, {"contains", "3 + 4"}}},
       {"reply", {{"answer", R"({"difficulty": "medium"})"}}}},
      {{"match", {{"system_contains", "estimate how many"}}}, {"reply", {{"answer", "hard, I think"}}}},
      {{"match", {{"system_contains", "less than 500 tokens"}}}, {"reply", {{"thinking", words(20)}, {"answer", "\\boxed{7}"}}}},
      {{"match", {{"system_contains", "less than 1500 tokens"}}}, {"reply", {{"thinking", words(90)}, {"answer", "\\boxed{9}"}}}},
  });
  Harness h(fixture, "qwen3.5");
  auto o = h.run("tale_ep");
  REQUIRE(o.passes().size() == 2);
  CHECK(o.passes()[0].role == "estimate");
  CHECK(o.passes()[0].mode == ThinkingMode::no_think());
  CHECK(o.passes()[1].mode == ThinkingMode::think());
  CHECK(o.find_event("tale_estimate")->detail == json{{"difficulty", "medium"}, {"budget", 500}, {"source", "parsed"}});
  CHECK(o.total_tokens() == 2 + 21);
  CHECK(o.final_answer() == "\\boxed{7}");

  o = h.run("tale_ep", Query{"q2", Domain::math, "Other.", "9", nullptr});
  CHECK(o.find_event("tale_estimate")->detail["source"] == "fallback");
  CHECK(o.find_event("tale_estimate")->detail["budget"] == 1500);
  CHECK(o.final_answer() == "\\boxed{9}");
}

TEST_CASE("budget guidance, sot and cod prompts") {
  auto fixture = script({
      {{"match", {{"system_contains", "reasoning budget of 512 tokens"}}}, {"reply", {{"thinking", words(5)}, {"answer", "\\boxed{7}"}}}},
      {{"match", {{"system_contains", "Chunked Symbolism"}, {"thinking", false}}}, {"reply", {{"answer", "3+4=7 \\boxed{7}"}}}},
      {{"match", {{"system_contains", "Conceptual Chaining"}, {"thinking", false}}}, {"reply", {{"answer", "B"}}}},
      {{"match", {{"system_contains", "5 words at most"}, {"thinking", false}}}, {"reply", {{"answer", "add; \\boxed{7}"}}}},
  });
  Harness h(fixture, "qwen3.5");
  auto o = h.run("budget_guidance_medium");
  CHECK(o.passes()[0].mode == ThinkingMode::think_with_budget(512));
  CHECK(o.total_tokens() == 6);
  o = h.run("sot");
  CHECK(o.passes()[0].mode == ThinkingMode::no_think());
  CHECK(o.final_answer() == "3+4=7 \\boxed{7}");
  CHECK(h.run("sot", Query{"s", Domain::science, "Which?", "B", nullptr}).final_answer() == "B");
  CHECK(h.run("cod").final_answer() == "add; \\boxed{7}");
}

TEST_CASE("dynathink regenerates only when the fast pass is unsure") {
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  auto fixture = script({
      {{"match", {{"thinking", true}}}, {"reply", {{"thinking", words(50)}, {"answer", "\\boxed{7}"}}}},
      {{"match", {{"contains", "3 + 4"}}}, {"reply", {{"answer", "sure it is \\boxed{7}"}}}},
      {{"match", json::object()}, {"reply", {{"answer", words(9) + " \\boxed{2}"}, {"uncertain_at", all}}}},
  });
  Harness h(fixture, "qwen3.5");
  auto o = h.run("dynathink");
  REQUIRE(o.passes().size() == 1);
  CHECK(o.passes()[0].role == "fast");
  CHECK(o.find_event("confidence")->detail["value"].get<double>() == doctest::Approx(std::exp(-0.01)));
  CHECK_FALSE(o.find_event("confidence")->detail["escalate"].get<bool>());

  o = h.run("dynathink", Query{"q3", Domain::math, "Hard one.", "7", nullptr});
  REQUIRE(o.passes().size() == 2);
  CHECK(o.find_event("confidence")->detail["value"].get<double>() == doctest::Approx(1.0 / 20.0));
  CHECK(o.passes()[1].mode == ThinkingMode::think());
  CHECK(o.total_tokens() == 10 + 51);
  CHECK(o.final_answer() == "\\boxed{7}");
}

TEST_CASE("deer exits at a confident transition and answers from the prefix") {
  auto fixture = script({
      {{"match", {{"contains", "Reasoning so far"}}}, {"reply", {{"answer", "\\boxed{7}"}}}},
      {{"match", {{"contains", "3 + 4"}}}, {"reply", {{"thinking", words(80, 60)}, {"answer", "so \\boxed{7}"}}}},
      {{"match", json::object()},
       {"reply", {{"thinking", words(80, 60)}, {"answer", "\\boxed{7}"}, {"uncertain_at", std::vector<int>{50, 52, 54, 56, 58}}}}},
  });
  Harness h(fixture, "qwen3.5");
  auto o = h.run("deer");
  REQUIRE(o.passes().size() == 2);
  const auto* ev = o.find_event("early_exit");
  CHECK(ev->detail["exited"] == true);
  CHECK(ev->detail["token_index"] == 60);
  CHECK(ev->detail["pattern"] == "Wait");
  CHECK(ev->detail["generated_tokens"] == 82);
  CHECK(o.passes()[0].trace.total_tokens == 60);
  CHECK(o.passes()[0].trace.thinking_text == words(60));
  CHECK(o.passes()[1].mode == ThinkingMode::no_think());
  CHECK(o.total_tokens() == 61);
  CHECK(o.total_tokens() == pass_sum(o));

  // Five of the sixteen window tokens at 1/10 pulls the mean below 0.85.
  o = h.run("deer", Query{"q4", Domain::math, "Other.", "7", nullptr});
  REQUIRE(o.passes().size() == 1);
  CHECK(o.find_event("early_exit")->detail["exited"] == false);
  CHECK(o.total_tokens() == 81);
}

TEST_CASE("deer and dynathink need logprobs") {
  auto fixture = script({{{"match", json::object()}, {"reply", {{"thinking", words(5)}, {"answer", "x"}, {"logprobs", false}}}}});
  Harness h(fixture, "qwen3.5");
  for (const char* name : {"deer", "dynathink"}) {
    const auto o = h.run(name);
    REQUIRE(o.failed());
    CHECK(o.error()->kind == "capability");
    CHECK(o.passes().size() == 1);
    CHECK(o.total_tokens() == pass_sum(o));
  }
}

TEST_CASE("rasc stops once samples agree and picks the shortest agreeing one") {
  auto agree = script({{{"match", json::object()},
                        {"replies", {{{"thinking", words(30)}, {"answer", "\\boxed{7}"}},
                                     {{"thinking", words(10)}, {"answer", "\\boxed{7}"}},
                                     {{"thinking", words(20)}, {"answer", "\\boxed{7}"}}}}}});
  Harness h(agree, "qwen3.5");
  auto o = h.run("rasc");
  REQUIRE(o.passes().size() == 3);
  CHECK(o.final_pass() == std::optional<std::size_t>(1));
  CHECK(o.total_tokens() == 31 + 11 + 21);
  CHECK(o.find_event("self_consistency")->detail["early_stop"] == true);

  json replies = json::array();
  for (int i = 0; i < 8; ++i) replies.push_back({{"thinking", words(10 + i)}, {"answer", "\\boxed{" + std::to_string(i) + "}"}});
  auto spread = script({{{"match", json::object()}, {"replies", replies}}});
  Harness g(spread, "qwen3.5", GenerationSettings{.seed = 3});
  o = g.run("rasc");
  REQUIRE(o.passes().size() == 8);
  CHECK(o.find_event("self_consistency")->detail["early_stop"] == false);
  // Seeds 3..10 map to variants 3,4,...,7,0,1,2; the shortest is variant 0.
  CHECK(o.final_pass() == std::optional<std::size_t>(5));
  CHECK(o.final_answer() == "\\boxed{0}");
  for (const auto& p : o.passes()) CHECK(p.role == "sample");
}

TEST_CASE("hdflow routes by score") {
  auto fixture = script({
      {{"match", {{"thinking", true}}}, {"reply", {{"thinking", words(50)}, {"answer", "\\boxed{1}"}}}},
      {{"match", json::object()}, {"reply", {{"answer", "\\boxed{1}"}}}},
  });
  Harness h(fixture, "seed-oss");
  auto o = h.run("hdflow", Query{"a", Domain::math, "What is 1?", "1", nullptr});
  CHECK(o.passes()[0].mode == ThinkingMode::budget(0));
  CHECK(o.find_event("routing")->detail["score"] == 0);
  o = h.run("hdflow", Query{"b", Domain::math, "Prove the polynomial has an integer root.", "1", nullptr});
  CHECK(o.passes()[0].mode == ThinkingMode::budget(32768));
  CHECK(o.find_event("routing")->detail["source"] == "heuristic");
}

TEST_CASE("mixreasoning uses the profile threshold") {
  auto fixture = script({{{"match", json::object()}, {"reply", {{"answer", "\\boxed{1}"}}}}});
  for (const char* name : {"qwen3.5", "gpt-oss", "seed-oss"}) {
    Harness h(fixture, name);
    const auto o = h.run("mixreasoning");
    REQUIRE_FALSE(o.failed());
    CHECK(o.strategy_name() == "mixreasoning");
    CHECK(o.find_event("entropy")->detail["threshold"].get<double>() == doctest::Approx(h.profile.entropy_threshold));
  }
}
