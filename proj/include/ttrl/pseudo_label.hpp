#pragma once

#include <vector>

#include "ttrl/mcq_env.hpp"

namespace ttrl {

// Majority-vote pseudo-label for one question. answer is an option index, or
// kNoAnswer when every vote was unparseable (the trainer skips such
// questions). confidence is the exact agreement fraction of the winning
// answer among the m votes.
struct PseudoLabel {
  int question_id = 0;
  int answer = kNoAnswer;
  double confidence = 0.0;
  std::vector<int> label_votes;  // histogram over the K options
  int unparseable_votes = 0;
  int num_votes = 0;
};

}  // namespace ttrl
