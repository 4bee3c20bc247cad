#pragma once

#include <string>
#include <vector>

#include "ttrl/pseudo_label.hpp"
#include "ttrl/policy.hpp"

namespace ttrl {

// Reduces a list of votes (option indices, kNoAnswer for unparseable) to the
// modal answer with its agreement fraction. Count ties break to the lowest
// option index. Unparseable votes stay in the denominator but are selected
// only when there is nothing else, in which case confidence is 1 and the
// question is skipped downstream.
PseudoLabel reduce_votes(int question_id, int num_options,
                         const std::vector<int>& votes);

// Draws m responses from the policy at the given temperature and majority-
// votes their parsed answers.
PseudoLabel generate_pseudo_label(const PolicyParams& policy, int question_id,
                                  int num_votes, double temperature, Rng& rng);

// Agreement fraction of `answer` within a histogram. Exact ratio, no
// smoothing. Throws when the histogram is empty or the answer has no votes.
double confidence(const std::vector<int>& label_votes, int unparseable_votes,
                  int answer);

// Line-delimited pseudo-label cache with fields question_id, answer,
// confidence, histogram.
void save_labels(const std::vector<PseudoLabel>& labels, const std::string& path);
std::vector<PseudoLabel> load_labels(const std::string& path);

}  // namespace ttrl
