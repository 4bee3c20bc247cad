#pragma once

#include <span>
#include <vector>

#include "ttrl/policy.hpp"

namespace ttrl {

// One group of rollouts for a single question, together with the temperature
// they were generated at (the ratio in the update compares tempered
// log-probabilities, so the temperature travels with the group).
struct RolloutGroup {
  int question_id = 0;
  double temperature = 1.0;
  std::vector<Response> responses;
};

struct SamplingOutcome {
  RolloutGroup group;
  int attempts_used = 1;
  bool all_identical = false;  // true iff even the chosen group is uniform
};

// True iff every response's raw token sequence equals the first's. Uniformity
// is defined on tokens, not parsed answers: two differently framed responses
// with the same answer still carry format-reward spread.
bool all_same(std::span<const Response> group);

// Multiple-attempt sampling: draw up to max_attempts groups of g rollouts and
// keep the first non-uniform one, falling through to the last. When eager is
// true (the default) all attempts are always drawn so rng consumption per
// call is fixed and ablation arms see identical streams; lazy mode
// short-circuits for throughput.
SamplingOutcome sample_with_attempts(const PolicyParams& policy, int question_id,
                                     int group_size, double temperature,
                                     int max_attempts, Rng& rng,
                                     bool eager = true);

}  // namespace ttrl
