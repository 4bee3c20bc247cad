#include "ttrl/mcq_env.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ttrl {

TrainingSet Dataset::training_view() const {
  TrainingSet view;
  view.questions.reserve(questions.size());
  for (const Question& q : questions) {
    view.questions.push_back(TrainingQuestion{q.id, q.num_options});
  }
  return view;
}

Dataset generate_dataset(int n, int k, double signal_strength,
                         std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  if (k < 2) throw std::invalid_argument("generate_dataset: k must be >= 2");
  if (k > 26) throw std::invalid_argument("generate_dataset: k must be <= 26");
  if (signal_strength < 0.0) {
    throw std::invalid_argument("generate_dataset: signal must be >= 0");
  }

  Rng rng = make_stream(seed, StreamTag::kDataset);
  Dataset dataset;
  dataset.seed = seed;
  dataset.questions.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Question& q = dataset.questions[static_cast<std::size_t>(i)];
    q.id = i;
    q.num_options = k;
    q.truth_index = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k)));
    q.signal = std::max(0.0, signal_strength - rng.next_exponential());
  }
  return dataset;
}

double eval_accuracy(const Dataset& dataset, const std::vector<int>& answers) {
  if (answers.size() != dataset.size()) {
    throw std::invalid_argument("eval_accuracy: answer count does not match dataset");
  }
  if (dataset.questions.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (answers[i] == dataset.questions[i].truth_index) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  for (const Question& q : dataset.questions) {
    nlohmann::ordered_json record;
    record["id"] = q.id;
    record["options"] = q.option_labels();
    record["truth"] = q.truth_index;
    record["signal"] = q.signal;
    out << record.dump() << '\n';
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  Dataset dataset;
  std::string line;
  int expected_id = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json record = nlohmann::json::parse(line);
    Question q;
    q.id = record.at("id").get<int>();
    q.num_options = static_cast<int>(record.at("options").size());
    q.truth_index = record.at("truth").get<int>();
    q.signal = record.at("signal").get<double>();
    if (q.id != expected_id) {
      throw std::runtime_error("load_dataset: ids must be contiguous from 0");
    }
    if (q.num_options < 2 || q.truth_index < 0 || q.truth_index >= q.num_options) {
      throw std::runtime_error("load_dataset: invalid record at id " +
                               std::to_string(q.id));
    }
    if (expected_id > 0 && q.num_options != dataset.questions.front().num_options) {
      throw std::runtime_error("load_dataset: mixed option counts are not supported");
    }
    ++expected_id;
    dataset.questions.push_back(q);
  }
  if (dataset.questions.empty()) {
    throw std::runtime_error("load_dataset: empty dataset in " + path);
  }
  return dataset;
}

}  // namespace ttrl
