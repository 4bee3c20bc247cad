#include <cmath>
#include <fstream>

#include <stdexcept>

#include "doctest.h"

#include "test_util.hpp"
#include "ttrl/mcq_env.hpp"

using namespace ttrl;

TEST_CASE("single question has truth inside the option range") {
  const Dataset d = generate_dataset(1, 4, 0.0, 7);
  REQUIRE(d.size() == 1);
  CHECK(d.questions[0].truth_index >= 0);
  CHECK(d.questions[0].truth_index < 4);
  CHECK(d.questions[0].signal == 0.0);  // zero signal stays exactly zero
}

TEST_CASE("generation is a pure function of its arguments") {
  const Dataset a = generate_dataset(200, 4, 0.5, 1);
  const Dataset b = generate_dataset(200, 4, 0.5, 1);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.questions[i].id == b.questions[i].id);
    CHECK(a.questions[i].truth_index == b.questions[i].truth_index);
    CHECK(a.questions[i].signal == b.questions[i].signal);
  }
}

TEST_CASE("truth frequencies stay near uniform") {
  // Window [0.20, 0.30] is +-3 binomial sigma around 1/4 at n=1000.
  const Dataset d = generate_dataset(1000, 4, 0.0, 3);
  std::array<int, 4> counts{};
  for (const Question& q : d.questions) {
    ++counts[static_cast<std::size_t>(q.truth_index)];
  }
  for (int c : counts) {
    const double freq = c / 1000.0;
    CHECK(freq >= 0.20);
    CHECK(freq <= 0.30);
  }
}

TEST_CASE("generation rejects degenerate arguments") {
  CHECK_THROWS_AS(generate_dataset(0, 4, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(10, 1, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(10, 27, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(10, 4, -0.1, 1), std::invalid_argument);
}

TEST_CASE("eval_accuracy counts exact matches and rejects mismatched input") {
  const Dataset d = test::make_dataset(4, {0, 1, 2, 3, 0, 1, 2, 3, 0, 1},
                                       std::vector<double>(10, 0.0));
  std::vector<int> truth_answers;
  for (const Question& q : d.questions) truth_answers.push_back(q.truth_index);
  CHECK(eval_accuracy(d, truth_answers) == 1.0);

  const std::vector<int> none(10, kNoAnswer);
  CHECK(eval_accuracy(d, none) == 0.0);

  std::vector<int> half = truth_answers;
  for (std::size_t i = 0; i < 5; ++i) half[i] = kNoAnswer;
  CHECK(eval_accuracy(d, half) == 0.5);

  CHECK_THROWS_AS(eval_accuracy(d, std::vector<int>(9, 0)),
                  std::invalid_argument);
}

TEST_CASE("dataset file round-trips with the fixed field order") {
  test::TempDir dir("mcq_env");
  const Dataset d = generate_dataset(37, 5, 0.7, 21);
  const std::string path = dir.file("data.jsonl");
  save_dataset(d, path);

  std::ifstream in(path);
  std::string first_line;
  std::getline(in, first_line);
  const auto pos_id = first_line.find("\"id\"");
  const auto pos_options = first_line.find("\"options\"");
  const auto pos_truth = first_line.find("\"truth\"");
  const auto pos_signal = first_line.find("\"signal\"");
  CHECK(pos_id < pos_options);
  CHECK(pos_options < pos_truth);
  CHECK(pos_truth < pos_signal);

  const Dataset loaded = load_dataset(path);
  REQUIRE(loaded.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(loaded.questions[i].id == d.questions[i].id);
    CHECK(loaded.questions[i].num_options == d.questions[i].num_options);
    CHECK(loaded.questions[i].truth_index == d.questions[i].truth_index);
    CHECK(loaded.questions[i].signal == d.questions[i].signal);
  }
}

template <typename T>
concept ExposesTruth = requires(T t) { t.truth_index; };
template <typename T>
concept ExposesSignal = requires(T t) { t.signal; };

TEST_CASE("training view strips the ground truth structurally") {
  const Dataset d = generate_dataset(5, 4, 0.3, 2);
  const TrainingSet view = d.training_view();
  REQUIRE(view.size() == 5);
  for (std::size_t i = 0; i < view.size(); ++i) {
    CHECK(view.questions[i].id == static_cast<int>(i));
    CHECK(view.questions[i].num_options == 4);
  }
  // The projection type has no truth or signal members at all.
  static_assert(ExposesTruth<Question>);
  static_assert(!ExposesTruth<TrainingQuestion>);
  static_assert(ExposesSignal<Question>);
  static_assert(!ExposesSignal<TrainingQuestion>);
}

TEST_CASE("signal distribution honors the scalar knob") {
  // P(signal == 0) = exp(-s); at s = 0.8 and n = 4000 the band below is
  // ~ +-3 binomial sigma.
  const Dataset d = generate_dataset(4000, 4, 0.8, 12);
  int zeros = 0;
  for (const Question& q : d.questions) {
    CHECK(q.signal >= 0.0);
    CHECK(q.signal <= 0.8);
    if (q.signal == 0.0) ++zeros;
  }
  const double frac = zeros / 4000.0;
  CHECK(frac > std::exp(-0.8) - 0.025);
  CHECK(frac < std::exp(-0.8) + 0.025);
}
