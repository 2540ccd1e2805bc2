#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "thinkswitch/core.hpp"

namespace thinkswitch {

/// Content of the last brace-balanced `\boxed{...}` (or `\fbox{...}`).
std::optional<std::string> extract_boxed(std::string_view text);

/// The final option letter (A-J) stated in a response: a boxed letter, the
/// last "answer is X" / "Answer: X" / "(X)" mention, or a bare letter.
std::optional<char> extract_option_letter(std::string_view text);

/// Canonical form for string comparison of math answers: whitespace,
/// `$`, `\left`/`\right`, `\!`, `\,`, `\text{}` wrappers, a trailing period and
/// a leading `+` are dropped; unicode minus becomes `-`.
std::string normalize_math_answer(std::string_view answer);

/// Key used to group sampled answers for self-consistency voting.
std::string answer_key(std::string_view response, Domain domain);

}  // namespace thinkswitch
