#include "ttrl/labeling.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "ttrl/reward.hpp"

namespace ttrl {

PseudoLabel reduce_votes(int question_id, int num_options,
                         const std::vector<int>& votes) {
  if (votes.empty()) {
    throw std::invalid_argument("reduce_votes: need at least one vote");
  }
  PseudoLabel label;
  label.question_id = question_id;
  label.num_votes = static_cast<int>(votes.size());
  label.label_votes.assign(static_cast<std::size_t>(num_options), 0);
  for (int vote : votes) {
    if (vote == kNoAnswer) {
      ++label.unparseable_votes;
    } else if (vote >= 0 && vote < num_options) {
      ++label.label_votes[static_cast<std::size_t>(vote)];
    } else {
      throw std::invalid_argument("reduce_votes: vote out of range");
    }
  }

  int best = kNoAnswer;
  int best_count = 0;
  for (int k = 0; k < num_options; ++k) {
    const int count = label.label_votes[static_cast<std::size_t>(k)];
    if (count > best_count) {  // strict: ties keep the lowest index
      best_count = count;
      best = k;
    }
  }
  if (best == kNoAnswer) {
    // Every vote was unparseable.
    label.answer = kNoAnswer;
    label.confidence = 1.0;
  } else {
    label.answer = best;
    label.confidence =
        static_cast<double>(best_count) / static_cast<double>(label.num_votes);
  }
  return label;
}

PseudoLabel generate_pseudo_label(const PolicyParams& policy, int question_id,
                                  int num_votes, double temperature, Rng& rng) {
  if (num_votes < 1) {
    throw std::invalid_argument("generate_pseudo_label: need at least one vote");
  }
  std::vector<int> votes;
  votes.reserve(static_cast<std::size_t>(num_votes));
  for (int m = 0; m < num_votes; ++m) {
    const Response response = sample(policy, question_id, temperature, rng);
    votes.push_back(parse_answer(response, policy.vocab).label);
  }
  return reduce_votes(question_id, policy.vocab.num_labels, votes);
}

double confidence(const std::vector<int>& label_votes, int unparseable_votes,
                  int answer) {
  int total = unparseable_votes;
  for (int count : label_votes) total += count;
  if (total == 0) throw std::invalid_argument("confidence: empty histogram");
  if (answer < 0 || answer >= static_cast<int>(label_votes.size()) ||
      label_votes[static_cast<std::size_t>(answer)] == 0) {
    throw std::invalid_argument("confidence: answer not present in histogram");
  }
  return static_cast<double>(label_votes[static_cast<std::size_t>(answer)]) /
         static_cast<double>(total);
}

void save_labels(const std::vector<PseudoLabel>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_labels: cannot open " + path);
  for (const PseudoLabel& label : labels) {
    nlohmann::ordered_json record;
    record["question_id"] = label.question_id;
    if (label.answer == kNoAnswer) {
      record["answer"] = "unparseable";
    } else {
      record["answer"] = std::string(1, label_char(label.answer));
    }
    record["confidence"] = label.confidence;
    nlohmann::ordered_json histogram;
    for (std::size_t k = 0; k < label.label_votes.size(); ++k) {
      histogram[std::string(1, label_char(static_cast<int>(k)))] =
          label.label_votes[k];
    }
    histogram["unparseable"] = label.unparseable_votes;
    record["histogram"] = histogram;
    record["m"] = label.num_votes;
    out << record.dump() << '\n';
  }
  if (!out) throw std::runtime_error("save_labels: write failed for " + path);
}

std::vector<PseudoLabel> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_labels: cannot open " + path);
  std::vector<PseudoLabel> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json record = nlohmann::json::parse(line);
    PseudoLabel label;
    label.question_id = record.at("question_id").get<int>();
    label.confidence = record.at("confidence").get<double>();
    label.num_votes = record.at("m").get<int>();
    const auto& histogram = record.at("histogram");
    label.label_votes.assign(histogram.size() - 1, 0);
    for (const auto& [key, value] : histogram.items()) {
      if (key == "unparseable") {
        label.unparseable_votes = value.get<int>();
      } else {
        label.label_votes[static_cast<std::size_t>(key[0] - 'A')] =
            value.get<int>();
      }
    }
    const std::string answer = record.at("answer").get<std::string>();
    label.answer = answer == "unparseable" ? kNoAnswer : answer[0] - 'A';
    labels.push_back(std::move(label));
  }
  return labels;
}

}  // namespace ttrl
