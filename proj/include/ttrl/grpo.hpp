#pragma once

#include <span>
#include <vector>

#include "ttrl/advantage.hpp"
#include "ttrl/parallel.hpp"
#include "ttrl/policy.hpp"
#include "ttrl/sampling.hpp"

namespace ttrl {

struct GrpoConfig {
  double clip_epsilon = 0.2;
  double kl_beta = 0.0;
  double learning_rate = 2.0;
  int inner_epochs = 1;
  int accumulation_steps = 2;

  void validate() const;
};

// Dense gradient with the same shape as PolicyParams.
struct PolicyGradient {
  std::array<std::vector<double>, kSeqLen> format;
  std::vector<std::vector<double>> option;

  static PolicyGradient zeros_like(const PolicyParams& policy);
  void add_scaled(const PolicyGradient& other, double scale);
  double norm() const;
  bool is_finite() const;
};

struct SurrogateReport {
  double objective = 0.0;
  double clipped_fraction = 0.0;  // tokens where the clipped branch won the min
  double grad_norm = 0.0;
  double mean_kl = 0.0;  // per-group three-position KL, diagnostic even at beta 0
};

struct ScoredGroup {
  RolloutGroup rollouts;
  AdvantageGroup advantages;
};

struct SurrogateResult {
  SurrogateReport report;
  PolicyGradient gradient;
};

// Clipped surrogate objective and its exact gradient:
//   mean over groups of mean over responses of token-mean of
//     min(c * A, clip(c, 1-eps, 1+eps) * A) - beta * KL(position)
// with c the per-token probability ratio of the current policy against the
// snapshot that generated the rollouts. The gradient follows the active
// branch of the min (zero where the clipped constant branch is active) and
// includes the exact categorical KL gradient when beta > 0. Group
// contributions are reduced in fixed group order so results are bit-stable
// across thread counts.
SurrogateResult surrogate_and_grad(const PolicyParams& policy,
                                   const PolicyParams& snapshot,
                                   const PolicyParams& reference,
                                   std::span<const ScoredGroup> groups,
                                   const GrpoConfig& config,
                                   ExecMode mode = ExecMode::kSerial);

// Ascent step: theta + learning_rate * gradient, with a fresh snapshot id.
// Throws on non-finite gradient entries; the policy is left untouched then.
PolicyParams apply_update(const PolicyParams& policy,
                          const PolicyGradient& gradient, double learning_rate);

}  // namespace ttrl
