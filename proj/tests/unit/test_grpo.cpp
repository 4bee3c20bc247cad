#include <cmath>

#include <stdexcept>

#include "doctest.h"

#include "test_util.hpp"
#include "ttrl/grpo.hpp"

using namespace ttrl;

namespace {

struct Scenario {
  PolicyParams policy;
  PolicyParams snapshot;
  PolicyParams reference;
  std::vector<ScoredGroup> groups;
  GrpoConfig config;
};

// Random batch of rollout groups from a random snapshot. When `shifted` the
// current policy is nudged away from the snapshot so ratios leave 1 and the
// clip can become active.
Scenario make_scenario(Rng& rng, bool shifted, double beta) {
  Scenario s;
  const int num_questions = 3;
  s.snapshot = test::random_policy(num_questions, 4, 1.5, rng);
  s.snapshot.snapshot_id = 40 + rng.next_below(100);
  s.reference = test::random_policy(num_questions, 4, 1.5, rng);

  s.policy = s.snapshot;
  if (shifted) {
    for (auto& row : s.policy.format_logits) {
      for (double& v : row) v += 0.35 * (2.0 * rng.next_double() - 1.0);
    }
    for (auto& row : s.policy.option_logits) {
      for (double& v : row) v += 0.35 * (2.0 * rng.next_double() - 1.0);
    }
  }

  const std::size_t batch = 1 + rng.next_below(3);
  for (std::size_t b = 0; b < batch; ++b) {
    ScoredGroup group;
    group.rollouts.question_id = static_cast<int>(rng.next_below(num_questions));
    group.rollouts.temperature = 0.7 + 0.7 * rng.next_double();
    const std::size_t g = 2 + rng.next_below(3);
    for (std::size_t i = 0; i < g; ++i) {
      group.rollouts.responses.push_back(sample(
          s.snapshot, group.rollouts.question_id, group.rollouts.temperature,
          rng));
    }
    group.advantages.values.resize(g);
    for (double& a : group.advantages.values) {
      a = 3.0 * rng.next_double() - 1.5;
    }
    s.groups.push_back(std::move(group));
  }

  s.config.clip_epsilon = 0.2;
  s.config.kl_beta = beta;
  return s;
}

double objective_at(const Scenario& s, const PolicyParams& params) {
  return surrogate_and_grad(params, s.snapshot, s.reference, s.groups, s.config)
      .report.objective;
}

}  // namespace

TEST_CASE("ratio-one identity: objective is the mean advantage, nothing clips") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const Scenario s = make_scenario(rng, /*shifted=*/false, /*beta=*/0.0);
    const SurrogateResult result =
        surrogate_and_grad(s.policy, s.snapshot, s.reference, s.groups, s.config);

    double expected = 0.0;
    for (const ScoredGroup& group : s.groups) {
      double group_mean = 0.0;
      for (double a : group.advantages.values) group_mean += a;
      expected += group_mean / static_cast<double>(group.advantages.values.size());
    }
    expected /= static_cast<double>(s.groups.size());

    CHECK(result.report.clipped_fraction == 0.0);
    CHECK(result.report.objective == doctest::Approx(expected).epsilon(1e-12));

    // Gradient equals the advantage-weighted mean of log-prob gradients.
    PolicyGradient direct = PolicyGradient::zeros_like(s.policy);
    for (const ScoredGroup& group : s.groups) {
      const double scale =
          1.0 / (static_cast<double>(s.groups.size()) *
                 static_cast<double>(group.advantages.values.size()) * kSeqLen);
      for (std::size_t i = 0; i < group.advantages.values.size(); ++i) {
        const ResponseLogProb lp = logprob_and_grad(
            s.policy, group.rollouts.responses[i], group.rollouts.temperature);
        const double a = group.advantages.values[i];
        for (int pos = 0; pos < kSeqLen; pos += 2) {
          const std::size_t p = static_cast<std::size_t>(pos);
          for (std::size_t j = 0; j < direct.format[p].size(); ++j) {
            direct.format[p][j] += scale * a * lp.format_grad[p][j];
          }
        }
        auto& row = direct.option[static_cast<std::size_t>(lp.question_id)];
        for (std::size_t j = 0; j < row.size(); ++j) {
          row[j] += scale * a * lp.option_grad[j];
        }
      }
    }
    for (int pos = 0; pos < kSeqLen; ++pos) {
      const std::size_t p = static_cast<std::size_t>(pos);
      for (std::size_t j = 0; j < direct.format[p].size(); ++j) {
        CHECK(result.gradient.format[p][j] ==
              doctest::Approx(direct.format[p][j]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("collapsed groups with beta zero give an exactly zero gradient") {
  Rng rng(55);
  Scenario s = make_scenario(rng, false, 0.0);
  for (ScoredGroup& group : s.groups) {
    std::fill(group.advantages.values.begin(), group.advantages.values.end(),
              0.0);
    group.advantages.collapsed = true;
  }
  const SurrogateResult result =
      surrogate_and_grad(s.policy, s.snapshot, s.reference, s.groups, s.config);
  CHECK(result.report.objective == 0.0);
  CHECK(result.report.grad_norm == 0.0);
  for (const auto& row : result.gradient.format) {
    for (double v : row) CHECK(v == 0.0);
  }
  for (const auto& row : result.gradient.option) {
    for (double v : row) CHECK(v == 0.0);
  }
}

TEST_CASE("surrogate gradient matches central finite differences") {
  Rng rng(2025);
  int instances = 0;
  int clipped_instances = 0;

  while (instances < 110) {
    const bool shifted = instances % 2 == 1;
    const double beta = instances % 4 < 2 ? 0.0 : 0.04;
    Scenario s = make_scenario(rng, shifted, beta);
    const SurrogateResult analytic =
        surrogate_and_grad(s.policy, s.snapshot, s.reference, s.groups, s.config);
    if (analytic.report.clipped_fraction > 0.0) ++clipped_instances;

    const double h = 1e-5;
    auto check_row = [&](std::vector<double>& row, const std::vector<double>& grad) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double saved = row[j];
        row[j] = saved + h;
        const double up = objective_at(s, s.policy);
        row[j] = saved - h;
        const double down = objective_at(s, s.policy);
        row[j] = saved;
        const double fd = (up - down) / (2.0 * h);
        CHECK(std::abs(grad[j] - fd) <=
              1e-5 * std::max(1.0, std::abs(grad[j])));
      }
    };

    for (int pos = 0; pos < kSeqLen; ++pos) {
      const std::size_t p = static_cast<std::size_t>(pos);
      check_row(s.policy.format_logits[p], analytic.gradient.format[p]);
    }
    for (std::size_t q = 0; q < s.policy.option_logits.size(); ++q) {
      check_row(s.policy.option_logits[q], analytic.gradient.option[q]);
    }
    ++instances;
  }
  // The randomized suite must actually exercise the clipped branch.
  CHECK(clipped_instances >= 10);
}

TEST_CASE("objective is invariant to response and group order") {
  Rng rng(303);
  for (int trial = 0; trial < 20; ++trial) {
    Scenario s = make_scenario(rng, true, 0.04);
    const double base = objective_at(s, s.policy);

    // Rotate groups and reverse each group's responses with their advantages.
    std::rotate(s.groups.begin(), s.groups.begin() + 1, s.groups.end());
    for (ScoredGroup& group : s.groups) {
      std::reverse(group.rollouts.responses.begin(),
                   group.rollouts.responses.end());
      std::reverse(group.advantages.values.begin(),
                   group.advantages.values.end());
    }
    CHECK(objective_at(s, s.policy) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("mismatched snapshots and misaligned advantages are rejected") {
  Rng rng(404);
  Scenario s = make_scenario(rng, false, 0.0);
  PolicyParams wrong_snapshot = s.snapshot;
  wrong_snapshot.snapshot_id += 1;
  CHECK_THROWS_AS(surrogate_and_grad(s.policy, wrong_snapshot, s.reference,
                                     s.groups, s.config),
                  std::invalid_argument);

  s.groups[0].advantages.values.pop_back();
  CHECK_THROWS_AS(surrogate_and_grad(s.policy, s.snapshot, s.reference,
                                     s.groups, s.config),
                  std::invalid_argument);
}

TEST_CASE("one small ascent step does not decrease the objective") {
  Rng rng(505);
  for (int trial = 0; trial < 25; ++trial) {
    const Scenario s = make_scenario(rng, trial % 2 == 1, 0.0);
    const SurrogateResult result =
        surrogate_and_grad(s.policy, s.snapshot, s.reference, s.groups, s.config);
    const PolicyParams stepped =
        apply_update(s.policy, result.gradient, 1e-4);
    CHECK(objective_at(s, stepped) >= result.report.objective - 1e-12);
  }
}

TEST_CASE("a single positive-advantage response becomes more likely") {
  Rng rng(606);
  PolicyParams policy = test::random_policy(2, 4, 1.0, rng);
  policy.snapshot_id = 7;

  ScoredGroup group;
  group.rollouts.question_id = 1;
  group.rollouts.temperature = 1.0;
  group.rollouts.responses.push_back(sample(policy, 1, 1.0, rng));
  group.rollouts.responses.push_back(sample(policy, 1, 1.0, rng));
  while (group.rollouts.responses[1].tokens == group.rollouts.responses[0].tokens) {
    group.rollouts.responses[1] = sample(policy, 1, 1.0, rng);
  }
  group.advantages.values = {1.0, -1.0};

  GrpoConfig config;
  const SurrogateResult result = surrogate_and_grad(
      policy, policy, policy, std::vector<ScoredGroup>{group}, config);
  const PolicyParams updated = apply_update(policy, result.gradient, 0.05);

  const double before =
      logprob_and_grad(policy, group.rollouts.responses[0], 1.0).total;
  const double after =
      logprob_and_grad(updated, group.rollouts.responses[0], 1.0).total;
  CHECK(after > before);
}

TEST_CASE("update mechanics: no-op on zero gradient, errors on bad input") {
  Rng rng(707);
  const PolicyParams policy = test::random_policy(2, 4, 1.0, rng);
  const PolicyGradient zeros = PolicyGradient::zeros_like(policy);

  const PolicyParams updated = apply_update(policy, zeros, 0.5);
  CHECK(test::same_params(policy, updated));
  CHECK(updated.snapshot_id == policy.snapshot_id + 1);

  CHECK_THROWS_AS(apply_update(policy, zeros, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(apply_update(policy, zeros, -1.0), std::invalid_argument);

  PolicyGradient bad = zeros;
  bad.option[0][1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(apply_update(policy, bad, 0.5), std::runtime_error);
}

TEST_CASE("config validation enforces the documented ranges") {
  GrpoConfig config;
  config.clip_epsilon = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.clip_epsilon = 1.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = GrpoConfig{};
  config.kl_beta = -0.1;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = GrpoConfig{};
  config.inner_epochs = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = GrpoConfig{};
  config.accumulation_steps = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}
