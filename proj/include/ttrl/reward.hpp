#pragma once

#include "ttrl/pseudo_label.hpp"
#include "ttrl/policy.hpp"

namespace ttrl {

// Result of extracting an answer from a response. label is kNoAnswer when the
// middle token is not a label token; well_formatted additionally requires the
// OPEN/CLOSE frame.
struct ParsedAnswer {
  int label = kNoAnswer;
  bool well_formatted = false;
};

struct RewardBreakdown {
  double accuracy_reward = 0.0;  // 1 iff the parsed label matches the target
  double format_reward = 0.0;    // 1 iff well formatted
  double total = 0.0;
};

// Token-level parse: the answer is the middle token when it is a label token,
// regardless of the surrounding frame; a broken frame only clears the
// well_formatted flag.
ParsedAnswer parse_answer(const Response& response, const Vocabulary& vocab);

// Unit accuracy + unit format reward against the pseudo-label. Accuracy is
// granted even when the frame is broken, so the two reward components carry
// independent signal.
RewardBreakdown score(const Response& response, const Vocabulary& vocab,
                      const PseudoLabel& pseudo_label);

}  // namespace ttrl
