#include "thinkswitch/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace thinkswitch {

double token_entropy(std::span<const TokenCandidate> candidates, std::size_t k) {
  if (candidates.empty()) throw EntropyError("token_entropy: empty candidate list");
  if (candidates.size() > k) {
    throw EntropyError("token_entropy: " + std::to_string(candidates.size()) + " candidates exceed k=" +
                       std::to_string(k));
  }
  double max_lp = -INFINITY;
  for (const auto& c : candidates) {
    if (!std::isfinite(c.logprob)) throw EntropyError("token_entropy: non-finite logprob");
    max_lp = std::max(max_lp, c.logprob);
  }
  if (candidates.size() == 1) return 0.0;

  // With d_i = l_i - max and Z = sum exp(d_i): H = log Z - sum p_i d_i.
  // Equal logprobs give Z = k' exactly, so H / log k' is exactly 1.
  double z = 0.0;
  for (const auto& c : candidates) z += std::exp(c.logprob - max_lp);
  double weighted = 0.0;
  for (const auto& c : candidates) {
    const double d = c.logprob - max_lp;
    weighted += std::exp(d) / z * d;
  }
  const double h = std::log(z) - weighted;
  const double normalised = h / std::log(static_cast<double>(candidates.size()));
  return std::clamp(normalised, 0.0, 1.0);
}

std::vector<double> token_entropies(const std::vector<TokenLogprobs>& tokens, std::size_t k) {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(token_entropy(t.top, k));
  return out;
}

void EscalationRule::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("escalation threshold must lie in (0, 1)");
  if (min_count < 1) throw std::invalid_argument("escalation min_count must be >= 1");
  if (!(min_fraction > 0.0 && min_fraction < 1.0)) {
    throw std::invalid_argument("escalation min_fraction must lie in (0, 1)");
  }
  if (k < 1) throw std::invalid_argument("escalation k must be >= 1");
}

EscalationStats escalation_stats(std::span<const double> entropies, const EscalationRule& rule) {
  EscalationStats s;
  s.tokens = entropies.size();
  if (entropies.empty()) return s;
  s.above_threshold = static_cast<std::size_t>(
      std::count_if(entropies.begin(), entropies.end(), [&](double e) { return e > rule.threshold; }));
  s.fraction = static_cast<double>(s.above_threshold) / static_cast<double>(s.tokens);
  s.escalate = s.above_threshold >= rule.min_count || s.fraction > rule.min_fraction;
  return s;
}

bool should_escalate(std::span<const double> entropies, const EscalationRule& rule) {
  return escalation_stats(entropies, rule).escalate;
}

double mean_top1_probability(const std::vector<TokenLogprobs>& tokens, std::size_t begin, std::size_t end) {
  end = std::min(end, tokens.size());
  if (begin >= end) return 0.0;
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    double best = tokens[i].logprob;
    for (const auto& c : tokens[i].top) best = std::max(best, c.logprob);
    sum += std::exp(best);
  }
  return sum / static_cast<double>(end - begin);
}

}  // namespace thinkswitch
