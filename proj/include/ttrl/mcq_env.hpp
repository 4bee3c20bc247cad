#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttrl/rng.hpp"

namespace ttrl {

// Answer sentinel shared across the whole pipeline: a parsed answer is either
// an option index in [0, K) or kNoAnswer.
inline constexpr int kNoAnswer = -1;

inline char label_char(int option_index) {
  return static_cast<char>('A' + option_index);
}

// One synthetic multiple-choice item. truth_index is the hidden ground truth:
// it is read only by evaluation code and by policy initialization, never by
// the adaptation path (see TrainingQuestion).
struct Question {
  int id = 0;
  int num_options = 0;
  int truth_index = 0;
  double signal = 0.0;  // logit bias toward truth_index at policy init, >= 0

  std::vector<std::string> option_labels() const {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(num_options));
    for (int k = 0; k < num_options; ++k) labels.emplace_back(1, label_char(k));
    return labels;
  }
};

// Truth-stripped projection handed to the adaptation path. The ground truth
// is absent from the type, so label-free training is enforced structurally
// rather than by convention.
struct TrainingQuestion {
  int id = 0;
  int num_options = 0;
};

struct TrainingSet {
  std::vector<TrainingQuestion> questions;

  std::size_t size() const { return questions.size(); }
};

struct Dataset {
  std::vector<Question> questions;
  std::uint64_t seed = 0;

  std::size_t size() const { return questions.size(); }
  int num_options() const {
    return questions.empty() ? 0 : questions.front().num_options;
  }

  TrainingSet training_view() const;
};

// Generates n questions with k options each. Ground truth is uniform over the
// options. The per-question signal is max(0, signal_strength - E) with E
// standard exponential, so the scalar controls both the bias magnitude on
// learnable questions and the fraction of pure-noise questions (signal 0),
// which is what makes greedy baseline accuracy tunable between 1/k and 1.
Dataset generate_dataset(int n, int k, double signal_strength,
                         std::uint64_t seed);

// Fraction of answers equal to the hidden truth; kNoAnswer counts as wrong.
// Throws on length mismatch.
double eval_accuracy(const Dataset& dataset, const std::vector<int>& answers);

// Line-delimited dataset file, one question per line with fields
// id, options, truth, signal in that order.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace ttrl
