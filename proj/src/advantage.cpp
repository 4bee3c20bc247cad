#include "ttrl/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace ttrl {

WeightKind weight_kind_from_string(const std::string& name) {
  if (name == "linear") return WeightKind::kLinear;
  if (name == "sqrt") return WeightKind::kSqrt;
  if (name == "exp") return WeightKind::kExp;
  if (name == "off") return WeightKind::kOff;
  throw std::invalid_argument("unknown weight kind '" + name + "'");
}

std::string to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::kLinear: return "linear";
    case WeightKind::kSqrt: return "sqrt";
    case WeightKind::kExp: return "exp";
    case WeightKind::kOff: return "off";
  }
  return "off";
}

double confidence_weight(WeightKind kind, double conf) {
  if (kind == WeightKind::kOff) return 1.0;
  if (!(conf > 0.0) || conf > 1.0) {
    throw std::invalid_argument("confidence_weight: conf must be in (0, 1]");
  }
  switch (kind) {
    case WeightKind::kLinear: return conf;
    case WeightKind::kSqrt: return std::sqrt(conf);
    case WeightKind::kExp: return std::exp(conf - 1.0);
    case WeightKind::kOff: break;
  }
  return 1.0;
}

AdvantageGroup compute_advantages(std::span<const double> rewards, double conf,
                                  WeightKind kind) {
  const std::size_t g = rewards.size();
  if (g < 2) {
    throw std::invalid_argument("compute_advantages: group size must be >= 2");
  }

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);

  double variance = 0.0;
  for (double r : rewards) variance += (r - mean) * (r - mean);
  variance /= static_cast<double>(g);  // population variance

  AdvantageGroup group;
  group.values.assign(g, 0.0);
  if (variance == 0.0) {
    group.collapsed = true;
    return group;
  }

  const double std_dev = std::sqrt(variance);
  const double weight = confidence_weight(kind, conf);
  for (std::size_t i = 0; i < g; ++i) {
    group.values[i] = (rewards[i] - mean) / std_dev * weight;
  }
  return group;
}

}  // namespace ttrl
