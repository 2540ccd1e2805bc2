#include "thinkswitch/eval.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "thinkswitch/answers.hpp"
#include "thinkswitch/routing.hpp"

namespace thinkswitch {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

DatasetError::DatasetError(std::string file, std::size_t line, const std::string& message)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + message), file_(std::move(file)), line_(line) {}

std::vector<Query> parse_dataset(std::string_view text, const std::string& source) {
  std::vector<Query> out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DatasetError(source, line_no, "not a JSON object");
    auto str_field = [&](const char* name) {
      auto it = j.find(name);
      if (it == j.end() || !it->is_string()) {
        throw DatasetError(source, line_no, std::string("missing or non-string field \"") + name + "\"");
      }
      return it->get<std::string>();
    };
    Query q;
    q.id = str_field("id");
    if (q.id.empty()) throw DatasetError(source, line_no, "empty id");
    const auto domain = str_field("domain");
    auto d = parse_domain(domain);
    if (!d) throw DatasetError(source, line_no, "unknown domain '" + domain + "' (expected math, science or code)");
    q.domain = *d;
    q.problem = str_field("problem");
    if (auto it = j.find("reference"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) throw DatasetError(source, line_no, "field \"reference\" must be a string");
      q.reference = it->get<std::string>();
    }
    if (auto it = j.find("grader_payload"); it != j.end()) q.grader_payload = *it;
    if (!seen.insert(q.id).second) throw DatasetError(source, line_no, "duplicate id '" + q.id + "'");
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<Query> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(path.string(), 0, "cannot open dataset");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), path.string());
}

std::string dataset_name(const std::filesystem::path& path) { return path.stem().string(); }

// ---------------------------------------------------------------------------
// Grading
// ---------------------------------------------------------------------------

namespace {

std::optional<double> as_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::optional<bool> grade_rule_based(const Query& q, std::string_view response_text) {
  switch (q.domain) {
    case Domain::math: {
      auto boxed = extract_boxed(response_text);
      if (!boxed) return std::nullopt;
      const auto got = normalize_math_answer(*boxed);
      const auto want = normalize_math_answer(q.reference);
      if (got.empty() || want.empty()) return std::nullopt;
      if (got == want) return true;
      auto a = as_number(got);
      auto b = as_number(want);
      if (a && b) return std::fabs(*a - *b) <= 1e-9 * std::max(1.0, std::fabs(*b));
      return std::nullopt;
    }
    case Domain::science: {
      auto got = extract_option_letter(response_text);
      auto want = extract_option_letter(q.reference);
      if (!got || !want) return std::nullopt;
      return *got == *want;
    }
    case Domain::code:
      return std::nullopt;
  }
  return std::nullopt;
}

bool parse_judge_verdict(std::string_view reply) {
  auto block = extract_json_block(reply);
  if (!block) return false;
  json j = json::parse(block->begin(), block->end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return false;
  auto it = j.find("correct");
  return it != j.end() && it->is_boolean() && it->get<bool>();
}

bool grade_llm_judge(const Query& q, std::string_view reference, std::string_view response_text,
                     const JudgeEndpoint& judge) {
  if (!judge.backend || !judge.profile || !judge.prompts) throw std::logic_error("judge endpoint not configured");
  auto msgs = render_llm_judge(q, reference, response_text, *judge.prompts);
  auto req = CompletionRequest::for_mode(*judge.profile, minimal_mode(*judge.profile), msgs.system, msgs.user);
  req.max_output_tokens = kJudgeMaxTokens;
  req.temperature = 0.0;
  return parse_judge_verdict(judge.backend->complete(req).answer_text);
}

std::string_view to_string(ExternalStatus s) {
  switch (s) {
    case ExternalStatus::passed:
      return "passed";
    case ExternalStatus::failed_check:
      return "failed_check";
    case ExternalStatus::timeout:
      return "timeout";
    case ExternalStatus::spawn_failure:
      return "spawn_failure";
  }
  return "failed_check";
}

ExternalResult grade_external(const Query& q, std::string_view response_text, const std::string& command,
                              std::chrono::milliseconds timeout) {
  const std::string input = json{{"id", q.id},
                                 {"domain", to_string(q.domain)},
                                 {"problem", q.problem},
                                 {"reference", q.reference},
                                 {"grader_payload", q.grader_payload},
                                 {"response", std::string(response_text)}}
                                .dump();
  int fds[2];
  if (pipe2(fds, O_CLOEXEC) != 0) return {ExternalStatus::spawn_failure, -1};

  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    return {ExternalStatus::spawn_failure, -1};
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(fds[0], STDIN_FILENO);
    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    execv("/bin/sh", const_cast<char* const*>(argv));
    _exit(127);
  }
  close(fds[0]);

  // Feed stdin from a helper thread so a child that never reads cannot block
  // the timeout loop.
  std::thread writer([fd = fds[1], &input] {
    // SIGPIPE is thread-directed, so blocking it here keeps an early-exiting
    // child from killing the process.
    sigset_t block;
    sigemptyset(&block);
    sigaddset(&block, SIGPIPE);
    pthread_sigmask(SIG_BLOCK, &block, nullptr);
    std::size_t off = 0;
    while (off < input.size()) {
      const ssize_t w = ::write(fd, input.data() + off, input.size() - off);
      if (w < 0 && errno == EINTR) continue;
      if (w <= 0) break;
      off += static_cast<std::size_t>(w);
    }
    close(fd);
    timespec zero{0, 0};
    sigtimedwait(&block, nullptr, &zero);
  });

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  bool timed_out = false;
  while (true) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      timed_out = true;
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  writer.join();

  if (timed_out) {
    spdlog::warn("external grader timed out after {} ms on {}", timeout.count(), q.id);
    return {ExternalStatus::timeout, -1};
  }
  if (WIFEXITED(status)) {
    const int code = WEXITSTATUS(status);
    if (code == 0) return {ExternalStatus::passed, 0};
    if (code == 127) return {ExternalStatus::spawn_failure, 127};
    return {ExternalStatus::failed_check, code};
  }
  return {ExternalStatus::failed_check, -1};
}

Grade grade_response(const Query& q, std::string_view response_text, const GraderConfig& config) {
  Grade g;
  const bool has_judge = config.judge.backend != nullptr;
  auto judge = [&](Grade& out) {
    try {
      out.correct = grade_llm_judge(q, q.reference, response_text, config.judge);
      out.method = "judge";
    } catch (const std::exception& e) {
      out.correct = false;
      out.failed = true;
      out.method = "judge";
      out.note = e.what();
    }
  };

  if (q.domain == Domain::code) {
    if (config.external_command) {
      auto r = grade_external(q, response_text, *config.external_command, config.external_timeout);
      g.method = "external";
      g.correct = r.correct();
      g.failed = r.status == ExternalStatus::spawn_failure;
      g.note = std::string(to_string(r.status));
      return g;
    }
    if (has_judge) {
      judge(g);
      return g;
    }
    g.method = "none";
    g.note = "no grader for code";
    return g;
  }

  auto rule = grade_rule_based(q, response_text);
  if (rule && *rule) {
    g.correct = true;
    g.method = "rule";
    return g;
  }
  const bool escalate = !rule || q.domain == Domain::math;
  if (escalate && has_judge) {
    judge(g);
    return g;
  }
  g.method = rule ? "rule" : "none";
  g.correct = false;
  if (!rule) g.note = "no answer extracted";
  return g;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

json result_to_json(const EvalResult& r) {
  json j = r.outcome;
  j["dataset"] = r.record.dataset;
  j["correct"] = r.record.correct;
  j["grade"] = json{{"method", r.grade.method}, {"failed", r.grade.failed}, {"note", r.grade.note}};
  return j;
}

EvalResult result_from_json(const json& j) {
  EvalResult r;
  r.outcome = j.get<StrategyOutcome>();
  r.record.query_id = r.outcome.query_id();
  r.record.strategy_name = r.outcome.strategy_name();
  r.record.dataset = j.at("dataset").get<std::string>();
  r.record.correct = j.at("correct").get<bool>();
  r.record.total_tokens = r.outcome.total_tokens();
  const auto& g = j.at("grade");
  r.grade.method = g.at("method").get<std::string>();
  r.grade.failed = g.at("failed").get<bool>();
  r.grade.note = g.at("note").get<std::string>();
  r.record.failed = r.outcome.failed() || r.grade.failed;
  if (r.record.failed && r.record.correct) throw SchemaError("record " + r.record.query_id + " is failed but correct");
  return r;
}

EvalResult make_result(const Query& q, const std::string& dataset, StrategyOutcome outcome, const GraderConfig& config) {
  EvalResult r;
  if (outcome.failed()) {
    r.grade.method = "none";
    r.grade.note = "strategy failed";
  } else {
    r.grade = grade_response(q, outcome.final_answer(), config);
  }
  r.record.query_id = outcome.query_id();
  r.record.dataset = dataset;
  r.record.strategy_name = outcome.strategy_name();
  r.record.total_tokens = outcome.total_tokens();
  r.record.failed = outcome.failed() || r.grade.failed;
  r.record.correct = !r.record.failed && r.grade.correct;
  r.outcome = std::move(outcome);
  return r;
}

void write_results(const std::vector<EvalResult>& results, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : results) out << result_to_json(r).dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<EvalResult> read_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<EvalResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(result_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<EvalResult> read_results_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EvalResult> out;
  for (const auto& f : files) {
    auto part = read_results(f);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace thinkswitch
