#include "ttrl/sampling.hpp"

#include <stdexcept>

namespace ttrl {

bool all_same(std::span<const Response> group) {
  if (group.empty()) {
    throw std::invalid_argument("all_same: empty group");
  }
  for (const Response& response : group.subspan(1)) {
    if (response.tokens != group.front().tokens) return false;
  }
  return true;
}

SamplingOutcome sample_with_attempts(const PolicyParams& policy, int question_id,
                                     int group_size, double temperature,
                                     int max_attempts, Rng& rng, bool eager) {
  if (group_size < 1) {
    throw std::invalid_argument("sample_with_attempts: group size must be >= 1");
  }
  if (max_attempts < 1) {
    throw std::invalid_argument("sample_with_attempts: max_attempts must be >= 1");
  }

  SamplingOutcome outcome;
  outcome.group.question_id = question_id;
  outcome.group.temperature = temperature;

  bool chosen = false;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::vector<Response> responses;
    responses.reserve(static_cast<std::size_t>(group_size));
    for (int i = 0; i < group_size; ++i) {
      responses.push_back(sample(policy, question_id, temperature, rng));
    }
    const bool uniform = all_same(responses);

    if (!chosen && (!uniform || attempt == max_attempts)) {
      outcome.group.responses = std::move(responses);
      outcome.attempts_used = attempt;
      outcome.all_identical = uniform;
      chosen = true;
      if (!eager) break;
    }
  }
  return outcome;
}

}  // namespace ttrl
