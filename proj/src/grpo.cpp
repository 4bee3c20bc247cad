#include "ttrl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ttrl {

void GrpoConfig::validate() const {
  if (!(clip_epsilon > 0.0) || clip_epsilon >= 1.0) {
    throw std::invalid_argument("grpo: clip_epsilon must be in (0, 1)");
  }
  if (kl_beta < 0.0) throw std::invalid_argument("grpo: kl_beta must be >= 0");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("grpo: learning_rate must be > 0");
  }
  if (inner_epochs < 1) throw std::invalid_argument("grpo: inner_epochs must be >= 1");
  if (accumulation_steps < 1) {
    throw std::invalid_argument("grpo: accumulation_steps must be >= 1");
  }
}

PolicyGradient PolicyGradient::zeros_like(const PolicyParams& policy) {
  PolicyGradient grad;
  for (int pos = 0; pos < kSeqLen; ++pos) {
    grad.format[static_cast<std::size_t>(pos)].assign(
        policy.format_logits[static_cast<std::size_t>(pos)].size(), 0.0);
  }
  grad.option.resize(policy.option_logits.size());
  for (std::size_t q = 0; q < grad.option.size(); ++q) {
    grad.option[q].assign(policy.option_logits[q].size(), 0.0);
  }
  return grad;
}

void PolicyGradient::add_scaled(const PolicyGradient& other, double scale) {
  for (int pos = 0; pos < kSeqLen; ++pos) {
    auto& dst = format[static_cast<std::size_t>(pos)];
    const auto& src = other.format[static_cast<std::size_t>(pos)];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  }
  for (std::size_t q = 0; q < option.size(); ++q) {
    for (std::size_t i = 0; i < option[q].size(); ++i) {
      option[q][i] += scale * other.option[q][i];
    }
  }
}

double PolicyGradient::norm() const {
  double sum = 0.0;
  for (const auto& row : format) {
    for (double v : row) sum += v * v;
  }
  for (const auto& row : option) {
    for (double v : row) sum += v * v;
  }
  return std::sqrt(sum);
}

bool PolicyGradient::is_finite() const {
  for (const auto& row : format) {
    for (double v : row) {
      if (!std::isfinite(v)) return false;
    }
  }
  for (const auto& row : option) {
    for (double v : row) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

namespace {

// Per-group gradient: dense format rows plus the one option row the group's
// question touches.
struct GroupGradient {
  std::array<std::vector<double>, kSeqLen> format;
  std::vector<double> option_row;
  int question_id = 0;
  double objective = 0.0;
  int clipped_tokens = 0;
  double kl_sum = 0.0;
};

// d KL(p || r) / d z_j = p_j * (log p_j - log r_j - KL) for p = softmax(z).
std::vector<double> kl_gradient(const std::vector<double>& cur_logits,
                                const std::vector<double>& ref_logits,
                                double* kl_out) {
  const std::size_t n = cur_logits.size();
  std::vector<double> log_p(n), log_r(n);
  auto fill_log_softmax = [](const std::vector<double>& z, std::vector<double>& out) {
    double max_z = -std::numeric_limits<double>::infinity();
    for (double v : z) max_z = std::max(max_z, v);
    double norm = 0.0;
    for (double v : z) norm += std::exp(v - max_z);
    const double log_norm = max_z + std::log(norm);
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - log_norm;
  };
  fill_log_softmax(cur_logits, log_p);
  fill_log_softmax(ref_logits, log_r);

  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    kl += std::exp(log_p[i]) * (log_p[i] - log_r[i]);
  }
  kl = std::max(kl, 0.0);
  *kl_out = kl;

  std::vector<double> grad(n);
  for (std::size_t i = 0; i < n; ++i) {
    grad[i] = std::exp(log_p[i]) * (log_p[i] - log_r[i] - kl);
  }
  return grad;
}

GroupGradient group_surrogate(const PolicyParams& policy,
                              const PolicyParams& snapshot,
                              const PolicyParams& reference,
                              const ScoredGroup& group,
                              const GrpoConfig& config) {
  const RolloutGroup& rollouts = group.rollouts;
  const std::size_t g = rollouts.responses.size();
  if (g == 0 || group.advantages.values.size() != g) {
    throw std::invalid_argument("surrogate: advantage group misaligned with rollouts");
  }

  GroupGradient out;
  out.question_id = rollouts.question_id;
  const std::size_t vocab_size = static_cast<std::size_t>(policy.vocab.size());
  for (auto& row : out.format) row.assign(vocab_size, 0.0);
  out.option_row.assign(
      policy.option_logits[static_cast<std::size_t>(rollouts.question_id)].size(),
      0.0);

  const double response_scale = 1.0 / (static_cast<double>(g) * kSeqLen);
  for (std::size_t i = 0; i < g; ++i) {
    const Response& response = rollouts.responses[i];
    if (response.snapshot_id != snapshot.snapshot_id) {
      throw std::invalid_argument(
          "surrogate: response was not generated by the given snapshot");
    }
    if (response.question_id != rollouts.question_id) {
      throw std::invalid_argument("surrogate: response question mismatch");
    }
    const double advantage = group.advantages.values[i];
    const ResponseLogProb cur =
        logprob_and_grad(policy, response, rollouts.temperature);

    for (int pos = 0; pos < kSeqLen; ++pos) {
      const std::size_t p = static_cast<std::size_t>(pos);
      const double ratio = std::exp(cur.per_token[p] - response.token_logprobs[p]);
      const double clipped_ratio =
          std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
      const double unclipped = ratio * advantage;
      const double clipped = clipped_ratio * advantage;

      if (clipped < unclipped) {
        // Constant branch active: contributes value but no gradient.
        out.objective += response_scale * clipped;
        ++out.clipped_tokens;
      } else {
        out.objective += response_scale * unclipped;
        const double coef = response_scale * advantage * ratio;
        const std::vector<double>& grad_row =
            pos == 1 ? cur.option_grad : cur.format_grad[p];
        std::vector<double>& dst = pos == 1 ? out.option_row : out.format[p];
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += coef * grad_row[j];
      }
    }
  }

  // KL term: identical for every response of the group, so it enters once
  // with the token-mean factor 1/kSeqLen. With beta 0 it is diagnostic only.
  if (config.kl_beta > 0.0) {
    for (int pos = 0; pos < kSeqLen; ++pos) {
      const std::size_t p = static_cast<std::size_t>(pos);
      const std::size_t q = static_cast<std::size_t>(rollouts.question_id);
      const std::vector<double>& cur_row =
          pos == 1 ? policy.option_logits[q] : policy.format_logits[p];
      const std::vector<double>& ref_row =
          pos == 1 ? reference.option_logits[q] : reference.format_logits[p];
      double kl = 0.0;
      const std::vector<double> kl_grad = kl_gradient(cur_row, ref_row, &kl);
      std::vector<double>& dst = pos == 1 ? out.option_row : out.format[p];
      for (std::size_t j = 0; j < dst.size(); ++j) {
        dst[j] -= config.kl_beta / kSeqLen * kl_grad[j];
      }
      out.kl_sum += kl;
      out.objective -= config.kl_beta / kSeqLen * kl;
    }
  } else {
    out.kl_sum = kl_to_reference(policy, reference, rollouts.question_id);
  }

  return out;
}

}  // namespace

SurrogateResult surrogate_and_grad(const PolicyParams& policy,
                                   const PolicyParams& snapshot,
                                   const PolicyParams& reference,
                                   std::span<const ScoredGroup> groups,
                                   const GrpoConfig& config, ExecMode mode) {
  config.validate();
  if (groups.empty()) {
    throw std::invalid_argument("surrogate: need at least one group");
  }

  std::vector<GroupGradient> partials(groups.size());
  parallel_for(groups.size(), mode, [&](std::size_t g) {
    partials[g] = group_surrogate(policy, snapshot, reference, groups[g], config);
  });

  SurrogateResult result;
  result.gradient = PolicyGradient::zeros_like(policy);
  const double group_scale = 1.0 / static_cast<double>(groups.size());
  std::size_t total_tokens = 0;
  std::size_t clipped_tokens = 0;

  // Fixed-order reduction keeps results identical across thread counts.
  for (const GroupGradient& partial : partials) {
    result.report.objective += group_scale * partial.objective;
    result.report.mean_kl += group_scale * partial.kl_sum;
    clipped_tokens += static_cast<std::size_t>(partial.clipped_tokens);
    for (int pos = 0; pos < kSeqLen; ++pos) {
      const std::size_t p = static_cast<std::size_t>(pos);
      auto& dst = result.gradient.format[p];
      for (std::size_t j = 0; j < dst.size(); ++j) {
        dst[j] += group_scale * partial.format[p][j];
      }
    }
    auto& option_dst =
        result.gradient.option[static_cast<std::size_t>(partial.question_id)];
    for (std::size_t j = 0; j < option_dst.size(); ++j) {
      option_dst[j] += group_scale * partial.option_row[j];
    }
  }
  for (const ScoredGroup& group : groups) {
    total_tokens += group.rollouts.responses.size() * kSeqLen;
  }
  result.report.clipped_fraction =
      static_cast<double>(clipped_tokens) / static_cast<double>(total_tokens);
  result.report.grad_norm = result.gradient.norm();
  return result;
}

PolicyParams apply_update(const PolicyParams& policy,
                          const PolicyGradient& gradient, double learning_rate) {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("apply_update: learning_rate must be > 0");
  }
  if (!gradient.is_finite()) {
    throw std::runtime_error("apply_update: non-finite gradient entries");
  }
  if (gradient.option.size() != policy.option_logits.size()) {
    throw std::invalid_argument("apply_update: gradient shape mismatch");
  }

  PolicyParams updated = policy;
  for (int pos = 0; pos < kSeqLen; ++pos) {
    const std::size_t p = static_cast<std::size_t>(pos);
    for (std::size_t j = 0; j < updated.format_logits[p].size(); ++j) {
      updated.format_logits[p][j] += learning_rate * gradient.format[p][j];
    }
  }
  for (std::size_t q = 0; q < updated.option_logits.size(); ++q) {
    if (gradient.option[q].size() != policy.option_logits[q].size()) {
      throw std::invalid_argument("apply_update: gradient shape mismatch");
    }
    for (std::size_t j = 0; j < updated.option_logits[q].size(); ++j) {
      updated.option_logits[q][j] += learning_rate * gradient.option[q][j];
    }
  }
  updated.snapshot_id = policy.snapshot_id + 1;
  return updated;
}

}  // namespace ttrl
