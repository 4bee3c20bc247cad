#pragma once

#include <span>
#include <string>
#include <vector>

namespace ttrl {

// Candidate confidence weight functions. All are anchored at f(1) = 1 so they
// differ only in curvature and in their value at low confidence:
//   linear: conf       -> 0 as conf -> 0
//   sqrt:   sqrt(conf) -> 0
//   exp:    e^(conf-1) -> e^-1
// kOff disables weighting (factor 1) for the ablation arms.
enum class WeightKind { kLinear, kSqrt, kExp, kOff };

WeightKind weight_kind_from_string(const std::string& name);
std::string to_string(WeightKind kind);

// Weight factor for a confidence in (0, 1]. Throws outside that interval
// (except for kOff, which is constant 1).
double confidence_weight(WeightKind kind, double conf);

// Group-normalized advantages; one value per response, constant across the
// response's tokens.
struct AdvantageGroup {
  std::vector<double> values;
  bool collapsed = false;  // true iff the within-group reward spread is zero
};

// (r_i - mean) / population_std, scaled by confidence_weight(kind, conf).
// A zero-spread group yields all-zero advantages with the collapse flag set;
// no epsilon is added to the denominator. Requires at least two rewards.
AdvantageGroup compute_advantages(std::span<const double> rewards, double conf,
                                  WeightKind kind);

}  // namespace ttrl
