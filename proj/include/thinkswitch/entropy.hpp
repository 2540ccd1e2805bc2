#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "thinkswitch/core.hpp"

namespace thinkswitch {

class EntropyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Normalised Shannon entropy of a top-k candidate list.
///
/// The candidate probabilities exp(logprob) are renormalised over the list and
/// the entropy is divided by log(k'), where k' is the number of candidates
/// actually supplied (endpoints may return fewer than k). A single candidate
/// has entropy 0; equal logprobs give exactly 1.
///
/// Throws EntropyError for an empty list, more than k candidates, or
/// non-finite logprobs.
double token_entropy(std::span<const TokenCandidate> candidates, std::size_t k);

/// Per-token entropies of a pass, in generation order.
std::vector<double> token_entropies(const std::vector<TokenLogprobs>& tokens, std::size_t k);

/// Escalate when at least `min_count` tokens, or more than `min_fraction` of
/// all tokens, have entropy above `threshold`.
struct EscalationRule {
  double threshold = 0.10;
  std::size_t min_count = 3;
  double min_fraction = 0.05;
  std::size_t k = 20;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct EscalationStats {
  std::size_t tokens = 0;
  std::size_t above_threshold = 0;
  double fraction = 0.0;
  bool escalate = false;
};

EscalationStats escalation_stats(std::span<const double> entropies, const EscalationRule& rule);

/// False for an empty list.
bool should_escalate(std::span<const double> entropies, const EscalationRule& rule);

/// Mean top-1 candidate probability over tokens [begin, end) of a pass;
/// 0 for an empty range.
double mean_top1_probability(const std::vector<TokenLogprobs>& tokens, std::size_t begin, std::size_t end);

}  // namespace thinkswitch
