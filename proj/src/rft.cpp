#include "thinkswitch/rft.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

namespace thinkswitch {

using nlohmann::json;

void RewardParams::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw RewardError("reward weights must be non-negative");
  if (!(t_ref > 0.0)) throw RewardError("reference token count t_ref must be positive");
  if (group_size == 0) throw RewardError("group size must be at least 1");
}

ChatMessages rollout_messages(const Query& q, const StrategyContext& ctx, std::string_view strategy) {
  ChatMessages m;
  m.system = strategy_system_prompt(strategy, ctx.profile.family, ctx.prompts);
  m.user = strategy == "pt" ? render_pt_user_message(q, ctx.prompts) : render_user_message(q, ctx.prompts);
  return m;
}

namespace {

Rollout sample_rollout(const Query& q, const ThinkingMode& mode, std::uint64_t seed, const StrategyContext& ctx,
                       const CorrectnessFn& grade, const RolloutOptions& options, const ChatMessages& msgs) {
  Rollout r;
  r.problem_id = q.id;
  r.mode = mode;
  try {
    auto req = base_request(ctx, mode, msgs.system, msgs.user);
    req.temperature = options.temperature;
    req.seed = seed;
    r.response = ctx.backend.complete(req);
    r.tokens = r.response.total_tokens;
    r.correct = grade(q, r.response);
  } catch (const std::exception& e) {
    OutcomeBuilder scratch(q.id, "rollout");
    record_failure(scratch, e);
    r.error = std::move(scratch).build().error();
    r.correct = false;
  }
  return r;
}

}  // namespace

RolloutSet rollout_matrix(const Query& q, const std::vector<ThinkingMode>& modes, std::size_t K,
                          const StrategyContext& ctx, const CorrectnessFn& grade, const RolloutOptions& options) {
  if (K == 0) throw std::invalid_argument("rollout_matrix: K must be at least 1");
  for (const auto& m : modes) {
    if (!validate_mode(m, ctx.profile)) {
      throw GatewayError(GatewayErrorKind::mode_mismatch,
                         "mode " + m.label() + " is not valid for profile '" + ctx.profile.name + "'");
    }
  }
  RolloutSet set;
  set.problem_id = q.id;
  set.modes = modes;
  set.K = K;
  set.rollouts.resize(modes.size() * K);
  const auto msgs = rollout_messages(q, ctx, options.strategy);
  parallel_for(set.rollouts.size(), options.concurrency, [&](std::size_t idx) {
    set.rollouts[idx] = sample_rollout(q, modes[idx / K], options.seed + idx, ctx, grade, options, msgs);
  });
  return set;
}

std::optional<std::size_t> select_sft(const RolloutSet& set) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < set.rollouts.size(); ++i) {
    const auto& r = set.rollouts[i];
    if (!r.correct || r.failed()) continue;
    if (!best || r.tokens < set.rollouts[*best].tokens) best = i;
  }
  return best;
}

std::vector<DpoIndexPair> build_dpo_pairs(const RolloutSet& set) {
  std::vector<DpoIndexPair> pairs;
  const auto chosen = select_sft(set);
  if (!chosen) return pairs;
  const auto t_star = set.rollouts[*chosen].tokens;
  for (std::size_t i = 0; i < set.rollouts.size(); ++i) {
    const auto& r = set.rollouts[i];
    if (i == *chosen || r.failed()) continue;
    if (!r.correct || r.tokens > t_star) pairs.push_back({*chosen, i});
  }
  return pairs;
}

double grpo_reward(bool correct, double t_r, const RewardParams& params) {
  params.validate();
  if (!(t_r >= 0.0)) throw RewardError("token count must be non-negative");
  if (!correct) return 0.0;
  return params.alpha + params.beta * std::max(0.0, 1.0 - t_r / params.t_ref);
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
  if (rewards.empty()) throw std::invalid_argument("group_advantages: empty group");
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back(r - mean);
  return out;
}

std::optional<double> mean_tokens(const RolloutSet& set, const ThinkingMode& mode) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : set.rollouts) {
    if (r.mode == mode && !r.failed()) {
      sum += static_cast<double>(r.tokens);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<ThinkingMode> routing_label(const RolloutSet& set) {
  std::optional<ThinkingMode> best;
  double best_mean = 0.0;
  for (const auto& mode : set.modes) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : set.rollouts) {
      if (r.mode == mode && r.correct && !r.failed()) {
        sum += static_cast<double>(r.tokens);
        ++n;
      }
    }
    if (n == 0) continue;
    const double mean = sum / static_cast<double>(n);
    if (!best || mean < best_mean) {
      best = mode;
      best_mean = mean;
    }
  }
  return best;
}

std::string judge_reply_for(const ThinkingMode& mode, const ModelProfile& profile) {
  json reply;
  if (auto e = mode.get_if<EffortMode>()) {
    reply = json{{"level", to_string(e->level)}};
  } else if (auto b = mode.get_if<BinaryMode>()) {
    if (!b->think) {
      reply = json{{"mode", "2"}, {"budget", nullptr}};
    } else if (b->budget) {
      reply = json{{"mode", "3"}, {"budget", *b->budget}};
    } else {
      reply = json{{"mode", "1"}, {"budget", nullptr}};
    }
  } else if (auto n = mode.get_if<BudgetMode>()) {
    if (n->tokens == 0) {
      reply = json{{"mode", "2"}, {"budget", nullptr}};
    } else if (n->tokens >= profile.max_output_tokens) {
      reply = json{{"mode", "1"}, {"budget", nullptr}};
    } else {
      reply = json{{"mode", "3"}, {"budget", n->tokens}};
    }
  }
  return reply.dump();
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

namespace {

json messages_json(const ChatMessages& m) {
  json arr = json::array();
  if (!m.system.empty()) arr.push_back({{"role", "system"}, {"content", m.system}});
  arr.push_back({{"role", "user"}, {"content", m.user}});
  return arr;
}

ChatMessages messages_from(const json& arr) {
  ChatMessages m;
  bool saw_user = false;
  for (const auto& msg : arr) {
    const auto role = msg.at("role").get<std::string>();
    if (role == "system") {
      m.system = msg.at("content").get<std::string>();
    } else if (role == "user") {
      m.user = msg.at("content").get<std::string>();
      saw_user = true;
    } else {
      throw SchemaError("unexpected message role '" + role + "'");
    }
  }
  if (!saw_user) throw SchemaError("messages lack a user turn");
  return m;
}

json completion_json(const Completion& c) {
  return json{{"reasoning", c.thinking}, {"content", c.answer}, {"mode", c.mode}, {"tokens", c.tokens},
              {"correct", c.correct}};
}

Completion completion_from(const json& j) {
  Completion c;
  c.thinking = j.at("reasoning").get<std::string>();
  c.answer = j.at("content").get<std::string>();
  c.mode = j.at("mode").get<ThinkingMode>();
  c.tokens = j.at("tokens").get<TokenCount>();
  c.correct = j.at("correct").get<bool>();
  return c;
}

Completion completion_of(const Rollout& r) {
  return Completion{r.response.thinking_text, r.response.answer_text, r.mode, r.tokens, r.correct};
}

template <typename T>
void write_jsonl(const std::vector<T>& items, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& item : items) out << json(item).dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<T> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      items.push_back(json::parse(line).get<T>());
    } catch (const std::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

}  // namespace

void to_json(json& j, const SftSample& s) {
  j = json{{"messages", messages_json(s.prompt)},
           {"completion", completion_json(s.target)},
           {"metadata", {{"problem_id", s.problem_id}, {"strategy", s.strategy}, {"temperature", s.temperature}}}};
}

void from_json(const json& j, SftSample& s) {
  s.prompt = messages_from(j.at("messages"));
  s.target = completion_from(j.at("completion"));
  const auto& meta = j.at("metadata");
  s.problem_id = meta.at("problem_id").get<std::string>();
  s.strategy = meta.at("strategy").get<std::string>();
  s.temperature = meta.at("temperature").get<double>();
}

void to_json(json& j, const DpoPair& p) {
  j = json{{"messages", messages_json(p.prompt)},
           {"chosen", completion_json(p.chosen)},
           {"rejected", completion_json(p.rejected)},
           {"metadata", {{"problem_id", p.problem_id}, {"strategy", p.strategy}}}};
}

void from_json(const json& j, DpoPair& p) {
  p.prompt = messages_from(j.at("messages"));
  p.chosen = completion_from(j.at("chosen"));
  p.rejected = completion_from(j.at("rejected"));
  const auto& meta = j.at("metadata");
  p.problem_id = meta.at("problem_id").get<std::string>();
  p.strategy = meta.at("strategy").get<std::string>();
}

void to_json(json& j, const GrpoRecord& r) {
  j = json{{"group_id", r.group_id},
           {"index", r.index},
           {"messages", messages_json(r.prompt)},
           {"completion", completion_json(r.completion)},
           {"metadata",
            {{"problem_id", r.problem_id},
             {"strategy", r.strategy},
             {"reward", r.reward},
             {"advantage", r.advantage},
             {"t_ref", r.t_ref}}}};
}

void from_json(const json& j, GrpoRecord& r) {
  r.group_id = j.at("group_id").get<std::string>();
  r.index = j.at("index").get<std::size_t>();
  r.prompt = messages_from(j.at("messages"));
  r.completion = completion_from(j.at("completion"));
  const auto& meta = j.at("metadata");
  r.problem_id = meta.at("problem_id").get<std::string>();
  r.strategy = meta.at("strategy").get<std::string>();
  r.reward = meta.at("reward").get<double>();
  r.advantage = meta.at("advantage").get<double>();
  r.t_ref = meta.at("t_ref").get<double>();
}

std::string_view to_string(TrainingFormat f) {
  switch (f) {
    case TrainingFormat::sft:
      return "sft";
    case TrainingFormat::dpo:
      return "dpo";
    case TrainingFormat::grpo_log:
      return "grpo-log";
  }
  return "sft";
}

std::optional<TrainingFormat> parse_training_format(std::string_view text) {
  if (text == "sft") return TrainingFormat::sft;
  if (text == "dpo") return TrainingFormat::dpo;
  if (text == "grpo-log") return TrainingFormat::grpo_log;
  return std::nullopt;
}

void export_training_file(const std::vector<SftSample>& samples, const std::filesystem::path& path) {
  write_jsonl(samples, path);
}
void export_training_file(const std::vector<DpoPair>& pairs, const std::filesystem::path& path) {
  write_jsonl(pairs, path);
}
void export_training_file(const std::vector<GrpoRecord>& records, const std::filesystem::path& path) {
  write_jsonl(records, path);
}

std::vector<SftSample> parse_sft_file(const std::filesystem::path& path) { return read_jsonl<SftSample>(path); }
std::vector<DpoPair> parse_dpo_file(const std::filesystem::path& path) { return read_jsonl<DpoPair>(path); }
std::vector<GrpoRecord> parse_grpo_log(const std::filesystem::path& path) { return read_jsonl<GrpoRecord>(path); }

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

struct ProblemResult {
  RolloutSet set;
  std::vector<SftSample> sft;
  std::vector<DpoPair> dpo;
  std::vector<GrpoRecord> grpo;
  bool skipped = false;
  std::vector<std::string> warnings;
};

ProblemResult process_problem(const Query& q, std::size_t problem_index, const StrategyContext& ctx,
                              const CorrectnessFn& grade, const RftConfig& config,
                              const std::vector<ThinkingMode>& modes) {
  ProblemResult res;
  const bool routing = config.strategy == "rt";
  const std::size_t per_problem = modes.size() * config.K + config.reward.group_size;
  RolloutOptions opts{config.strategy, config.temperature, config.seed + problem_index * per_problem, 1};
  res.set = rollout_matrix(q, modes, config.K, ctx, grade, opts);
  const auto& set = res.set;

  const auto prompt = rollout_messages(q, ctx, config.strategy);
  const auto judge = render_judge_messages(q, ctx.profile.family, ctx.prompts);

  // Steps 2-3.
  if (routing) {
    const auto label = routing_label(set);
    if (!label) {
      res.skipped = true;
    } else {
      auto routed = [&](const ThinkingMode& m) {
        const auto mean = mean_tokens(set, m).value_or(0.0);
        return Completion{"", judge_reply_for(m, ctx.profile), m, static_cast<TokenCount>(std::llround(mean)),
                          m == *label};
      };
      res.sft.push_back(SftSample{q.id, config.strategy, judge, routed(*label), config.temperature});
      for (const auto& m : modes) {
        if (m == *label) continue;
        res.dpo.push_back(DpoPair{q.id, config.strategy, judge, routed(*label), routed(m)});
      }
    }
  } else {
    const auto best = select_sft(set);
    if (!best) {
      res.skipped = true;
    } else {
      res.sft.push_back(SftSample{q.id, config.strategy, prompt, completion_of(set.rollouts[*best]), config.temperature});
      for (const auto& p : build_dpo_pairs(set)) {
        res.dpo.push_back(DpoPair{q.id, config.strategy, prompt, completion_of(set.rollouts[p.chosen]),
                                  completion_of(set.rollouts[p.rejected])});
      }
    }
  }

  // Step 4.
  RewardParams params = config.reward;
  const auto t_ref = mean_tokens(set, full_think_mode(ctx.profile));
  if (!t_ref || *t_ref <= 0.0) {
    res.warnings.push_back(q.id + ": no full-think reference tokens; GRPO group skipped");
    return res;
  }
  params.t_ref = *t_ref;

  std::vector<Rollout> group;
  if (config.fresh_grpo_groups) {
    const std::uint64_t base = config.seed + problem_index * per_problem + modes.size() * config.K;
    for (std::size_t i = 0; i < params.group_size; ++i) {
      group.push_back(sample_rollout(q, modes[i % modes.size()], base + i, ctx, grade, opts, prompt));
    }
  } else {
    for (std::size_t i = 0; i < params.group_size; ++i) group.push_back(set.rollouts[i % set.rollouts.size()]);
  }
  std::vector<double> rewards;
  for (const auto& r : group) rewards.push_back(grpo_reward(r.correct, static_cast<double>(r.tokens), params));
  const auto adv = group_advantages(rewards);
  for (std::size_t i = 0; i < group.size(); ++i) {
    res.grpo.push_back(GrpoRecord{q.id + "#grpo", q.id, i, config.strategy, prompt, completion_of(group[i]), rewards[i],
                                  adv[i], params.t_ref});
  }
  return res;
}

}  // namespace

RftResult run_rft(const std::vector<Query>& queries, const StrategyContext& ctx, const CorrectnessFn& grade,
                  const RftConfig& config) {
  if (config.K == 0) throw std::invalid_argument("K must be at least 1");
  if (config.strategy != "pt" && config.strategy != "rt" && config.strategy != "baseline") {
    throw std::invalid_argument("RFT strategy must be pt, rt or baseline; got '" + config.strategy + "'");
  }
  RewardParams probe = config.reward;
  probe.t_ref = 1.0;
  probe.validate();

  auto modes = config.modes.empty() ? native_modes(ctx.profile) : config.modes;
  const auto full = full_think_mode(ctx.profile);
  if (std::find(modes.begin(), modes.end(), full) == modes.end()) modes.insert(modes.begin(), full);

  std::vector<ProblemResult> per_problem(queries.size());
  parallel_for(queries.size(), config.concurrency, [&](std::size_t i) {
    per_problem[i] = process_problem(queries[i], i, ctx, grade, config, modes);
  });

  RftResult out;
  for (auto& p : per_problem) {
    if (p.skipped) out.skipped.push_back(p.set.problem_id);
    for (auto& w : p.warnings) {
      spdlog::warn("{}", w);
      out.warnings.push_back(std::move(w));
    }
    std::move(p.sft.begin(), p.sft.end(), std::back_inserter(out.sft));
    std::move(p.dpo.begin(), p.dpo.end(), std::back_inserter(out.dpo));
    std::move(p.grpo.begin(), p.grpo.end(), std::back_inserter(out.grpo));
    out.sets.push_back(std::move(p.set));
  }
  return out;
}

}  // namespace thinkswitch
