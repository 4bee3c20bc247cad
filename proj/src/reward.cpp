#include "ttrl/reward.hpp"

namespace ttrl {

ParsedAnswer parse_answer(const Response& response, const Vocabulary& vocab) {
  ParsedAnswer parsed;
  const int middle = response.tokens[1];
  if (!vocab.is_label(middle)) return parsed;  // unparseable
  parsed.label = vocab.option_of(middle);
  parsed.well_formatted =
      response.tokens[0] == kTokenOpen && response.tokens[2] == kTokenClose;
  return parsed;
}

RewardBreakdown score(const Response& response, const Vocabulary& vocab,
                      const PseudoLabel& pseudo_label) {
  const ParsedAnswer parsed = parse_answer(response, vocab);
  RewardBreakdown reward;
  reward.accuracy_reward =
      (parsed.label != kNoAnswer && parsed.label == pseudo_label.answer) ? 1.0 : 0.0;
  reward.format_reward = parsed.well_formatted ? 1.0 : 0.0;
  reward.total = reward.accuracy_reward + reward.format_reward;
  return reward;
}

}  // namespace ttrl
