#include <cmath>

#include <stdexcept>

#include "doctest.h"

#include "test_util.hpp"
#include "ttrl/policy.hpp"

using namespace ttrl;

namespace {

Dataset four_option_dataset(double signal, int n = 3) {
  std::vector<int> truths;
  std::vector<double> signals;
  for (int i = 0; i < n; ++i) {
    truths.push_back(i % 4);
    signals.push_back(signal);
  }
  return test::make_dataset(4, truths, signals);
}

}  // namespace

TEST_CASE("zero signal gives a uniform answer distribution") {
  const PolicyParams policy = init_policy(four_option_dataset(0.0), 2.0, 1);
  const std::vector<double> probs = position_distribution(policy, 0, 1, 1.0);
  REQUIRE(probs.size() == 4);
  for (double p : probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("zero format bias gives a uniform opening distribution") {
  const PolicyParams policy = init_policy(four_option_dataset(0.5), 0.0, 1);
  const std::vector<double> probs = position_distribution(policy, 0, 0, 1.0);
  REQUIRE(probs.size() == 7);
  for (double p : probs) CHECK(p == doctest::Approx(1.0 / 7).epsilon(1e-12));
}

TEST_CASE("signal 0.5 puts the closed-form softmax mass on the truth") {
  const PolicyParams policy = init_policy(four_option_dataset(0.5), 2.0, 1);
  const double expected = std::exp(0.5) / (std::exp(0.5) + 3.0);
  for (int q = 0; q < 3; ++q) {
    const std::vector<double> probs = position_distribution(policy, q, 1, 1.0);
    const int truth = q % 4;
    CHECK(probs[static_cast<std::size_t>(truth)] ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("init rejects bad input") {
  CHECK_THROWS_AS(init_policy(Dataset{}, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(init_policy(four_option_dataset(0.5), -1.0, 0),
                  std::invalid_argument);
}

TEST_CASE("each position distribution is normalized") {
  Rng rng(42);
  const PolicyParams policy = test::random_policy(5, 4, 3.0, rng);
  for (int pos = 0; pos < kSeqLen; ++pos) {
    for (double temperature : {0.3, 1.0, 4.0}) {
      const std::vector<double> probs =
          position_distribution(policy, 2, pos, temperature);
      double sum = 0.0;
      for (double p : probs) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("near-zero temperature samples the argmax") {
  Rng rng(7);
  PolicyParams policy = test::random_policy(1, 4, 1.0, rng);
  const std::vector<double>& row = policy.option_logits[0];
  const int argmax =
      static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());

  Rng sampler(123);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    const Response r = sample(policy, 0, 1e-6, sampler);
    if (policy.vocab.option_of(r.tokens[1]) == argmax) ++hits;
  }
  CHECK(hits >= 9990);
}

TEST_CASE("temperature one sampling matches uniform frequencies") {
  const PolicyParams policy = init_policy(four_option_dataset(0.0), 4.0, 1);
  Rng sampler(5);
  std::array<int, 4> counts{};
  for (int i = 0; i < 10000; ++i) {
    const Response r = sample(policy, 0, 1.0, sampler);
    ++counts[static_cast<std::size_t>(policy.vocab.option_of(r.tokens[1]))];
  }
  for (int c : counts) {
    CHECK(c / 10000.0 == doctest::Approx(0.25).epsilon(0.08));  // 0.25 +- 0.02
  }
}

TEST_CASE("sampling is reproducible from the rng state") {
  Rng rng_a(99), rng_b(99);
  const PolicyParams policy = init_policy(four_option_dataset(0.5), 2.0, 1);
  for (int i = 0; i < 50; ++i) {
    const Response a = sample(policy, 1, 1.0, rng_a);
    const Response b = sample(policy, 1, 1.0, rng_b);
    CHECK(a.tokens == b.tokens);
    CHECK(a.token_logprobs == b.token_logprobs);
  }
}

TEST_CASE("dividing logits by the temperature equals tempered sampling") {
  Rng rng(11);
  const PolicyParams policy = test::random_policy(2, 4, 2.0, rng);
  const double temperature = 2.5;

  PolicyParams scaled = policy;
  for (auto& row : scaled.format_logits) {
    for (double& v : row) v /= temperature;
  }
  for (auto& row : scaled.option_logits) {
    for (double& v : row) v /= temperature;
  }

  for (int pos = 0; pos < kSeqLen; ++pos) {
    const auto tempered = position_distribution(policy, 1, pos, temperature);
    const auto plain = position_distribution(scaled, 1, pos, 1.0);
    for (std::size_t i = 0; i < tempered.size(); ++i) {
      CHECK(tempered[i] == doctest::Approx(plain[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("stored log-probabilities match a recomputation under the snapshot") {
  Rng rng(3);
  const PolicyParams policy = test::random_policy(4, 5, 2.0, rng);
  Rng sampler(17);
  for (int i = 0; i < 100; ++i) {
    const double temperature = 0.5 + 1.5 * sampler.next_double();
    const Response r = sample(policy, i % 4, temperature, sampler);
    const ResponseLogProb lp = logprob_and_grad(policy, r, temperature);
    double stored = 0.0;
    for (double v : r.token_logprobs) stored += v;
    CHECK(lp.total == doctest::Approx(stored).epsilon(1e-12));
  }
}

TEST_CASE("uniform four-option answer has log-probability ln(1/4)") {
  const PolicyParams policy = init_policy(four_option_dataset(0.0), 0.0, 1);
  Rng sampler(1);
  const Response r = sample(policy, 0, 1.0, sampler);
  const ResponseLogProb lp = logprob_and_grad(policy, r, 1.0);
  CHECK(lp.per_token[1] == doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("analytic log-probability gradient matches finite differences") {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    PolicyParams policy = test::random_policy(3, 4, 2.0, rng);
    const double temperature = 0.5 + rng.next_double();
    const int qid = static_cast<int>(rng.next_below(3));
    Rng sampler(trial);
    const Response response = sample(policy, qid, temperature, sampler);
    const ResponseLogProb analytic =
        logprob_and_grad(policy, response, temperature);

    const double h = 1e-5;
    auto check_coord = [&](std::vector<double>& row, std::size_t j,
                           double grad) {
      const double saved = row[j];
      row[j] = saved + h;
      const double up = logprob_and_grad(policy, response, temperature).total;
      row[j] = saved - h;
      const double down = logprob_and_grad(policy, response, temperature).total;
      row[j] = saved;
      const double fd = (up - down) / (2.0 * h);
      CHECK(std::abs(grad - fd) <= 1e-5 * std::max(1.0, std::abs(grad)));
      ++checked;
    };

    for (int pos = 0; pos < kSeqLen; pos += 2) {
      const std::size_t p = static_cast<std::size_t>(pos);
      for (std::size_t j = 0; j < policy.format_logits[p].size(); ++j) {
        check_coord(policy.format_logits[p], j, analytic.format_grad[p][j]);
      }
    }
    auto& option_row = policy.option_logits[static_cast<std::size_t>(qid)];
    for (std::size_t j = 0; j < option_row.size(); ++j) {
      check_coord(option_row, j, analytic.option_grad[j]);
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("log-probability rejects invalid responses") {
  const PolicyParams policy = init_policy(four_option_dataset(0.5), 2.0, 1);
  Rng sampler(1);
  Response r = sample(policy, 0, 1.0, sampler);
  r.tokens[1] = kTokenNoise;  // not a label token
  CHECK_THROWS_AS(logprob_and_grad(policy, r, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(sample(policy, 99, 1.0, sampler), std::invalid_argument);
}

TEST_CASE("KL to an identical policy is zero and never negative") {
  Rng rng(5);
  const PolicyParams policy = test::random_policy(3, 4, 2.0, rng);
  CHECK(kl_to_reference(policy, policy, 1) == 0.0);

  for (int trial = 0; trial < 50; ++trial) {
    PolicyParams other = test::random_policy(3, 4, 2.0, rng);
    CHECK(kl_to_reference(policy, other, trial % 3) >= 0.0);
  }
}

TEST_CASE("KL matches the closed form for a single perturbed logit") {
  const PolicyParams reference = init_policy(four_option_dataset(0.0), 1.0, 1);
  PolicyParams policy = reference;
  const double delta = 0.7;
  policy.option_logits[0][2] += delta;

  // p = softmax([0,0,delta,0]), r uniform; KL = sum p ln(4 p).
  const double denom = 3.0 + std::exp(delta);
  double expected = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double p = (j == 2 ? std::exp(delta) : 1.0) / denom;
    expected += p * std::log(4.0 * p);
  }
  CHECK(kl_to_reference(policy, reference, 0) ==
        doctest::Approx(expected).epsilon(1e-12));

  PolicyParams narrow = init_policy(four_option_dataset(0.0, 2), 1.0, 1);
  CHECK_THROWS_AS(kl_to_reference(policy, narrow, 0), std::invalid_argument);
}

TEST_CASE("greedy answer abstains exactly on ties") {
  const Dataset d = test::make_dataset(4, {2, 1}, {0.4, 0.0});
  const PolicyParams policy = init_policy(d, 2.0, 1);
  CHECK(greedy_answer(policy, 0) == 2);
  CHECK(greedy_answer(policy, 1) == kNoAnswer);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  test::TempDir dir("policy");
  Rng rng(8);
  PolicyParams policy = test::random_policy(6, 5, 10.0, rng);
  policy.snapshot_id = 1234;

  const std::string path = dir.file("p.txt");
  save_policy(policy, path);
  const PolicyParams loaded = load_policy(path);

  CHECK(loaded.snapshot_id == 1234);
  CHECK(loaded.vocab.num_labels == 5);
  CHECK(test::same_params(policy, loaded));

  CHECK_THROWS(load_policy(dir.file("missing.txt")));
}

TEST_CASE("KL stays finite for near-deterministic policies") {
  const Dataset d = test::make_dataset(4, {1, 2}, {1000.0, 0.5});
  const PolicyParams policy = init_policy(d, 1000.0, 1);
  CHECK(kl_to_reference(policy, policy, 0) == 0.0);

  PolicyParams nudged = policy;
  nudged.option_logits[0][0] += 0.5;
  const double kl = kl_to_reference(nudged, policy, 0);
  CHECK(std::isfinite(kl));
  CHECK(kl >= 0.0);
}
