#include "ttrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ttrl {
namespace {

std::vector<double> softmax(const std::vector<double>& logits, double temperature) {
  std::vector<double> probs(logits.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double z : logits) max_logit = std::max(max_logit, z / temperature);
  double norm = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] / temperature - max_logit);
    norm += probs[i];
  }
  for (double& p : probs) p /= norm;
  return probs;
}

double log_softmax_at(const std::vector<double>& logits, double temperature,
                      std::size_t index) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double z : logits) max_logit = std::max(max_logit, z / temperature);
  double norm = 0.0;
  for (double z : logits) norm += std::exp(z / temperature - max_logit);
  return logits[index] / temperature - max_logit - std::log(norm);
}

int draw_categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.next_double();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

void fill_log_softmax(const std::vector<double>& logits,
                      std::vector<double>& out) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double z : logits) max_logit = std::max(max_logit, z);
  double norm = 0.0;
  for (double z : logits) norm += std::exp(z - max_logit);
  const double log_norm = max_logit + std::log(norm);
  out.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_norm;
}

// Log-space evaluation keeps underflowed probabilities at an exact zero
// contribution instead of 0 * -inf.
double kl_categorical(const std::vector<double>& p_logits,
                      const std::vector<double>& q_logits) {
  std::vector<double> log_p, log_q;
  fill_log_softmax(p_logits, log_p);
  fill_log_softmax(q_logits, log_q);
  double kl = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    const double p = std::exp(log_p[i]);
    if (p > 0.0) kl += p * (log_p[i] - log_q[i]);
  }
  return std::max(kl, 0.0);
}

const std::vector<double>& row_for_position(const PolicyParams& policy,
                                            int question_id, int position) {
  if (question_id < 0 || question_id >= policy.num_questions()) {
    throw std::invalid_argument("policy: unknown question id " +
                                std::to_string(question_id));
  }
  if (position == 1) return policy.option_logits[static_cast<std::size_t>(question_id)];
  return policy.format_logits[static_cast<std::size_t>(position)];
}

void check_same_shape(const PolicyParams& a, const PolicyParams& b) {
  if (a.vocab.num_labels != b.vocab.num_labels ||
      a.num_questions() != b.num_questions()) {
    throw std::invalid_argument("policy: parameter shapes do not match");
  }
}

}  // namespace

std::string Vocabulary::token_name(int token) const {
  switch (token) {
    case kTokenOpen: return "OPEN";
    case kTokenClose: return "CLOSE";
    case kTokenNoise: return "NOISE";
    default:
      if (!is_label(token)) {
        throw std::invalid_argument("token_name: token out of range");
      }
      return std::string(1, label_char(option_of(token)));
  }
}

PolicyParams init_policy(const Dataset& dataset, double format_bias,
                         std::uint64_t seed) {
  (void)seed;
  if (dataset.questions.empty()) {
    throw std::invalid_argument("init_policy: empty dataset");
  }
  if (format_bias < 0.0) {
    throw std::invalid_argument("init_policy: format_bias must be >= 0");
  }

  PolicyParams policy;
  policy.vocab.num_labels = dataset.num_options();
  const std::size_t vocab_size = static_cast<std::size_t>(policy.vocab.size());
  for (auto& row : policy.format_logits) row.assign(vocab_size, 0.0);
  policy.format_logits[0][kTokenOpen] += format_bias;
  policy.format_logits[2][kTokenClose] += format_bias;

  policy.option_logits.resize(dataset.size());
  for (std::size_t q = 0; q < dataset.size(); ++q) {
    const Question& question = dataset.questions[q];
    auto& row = policy.option_logits[q];
    row.assign(static_cast<std::size_t>(question.num_options), 0.0);
    row[static_cast<std::size_t>(question.truth_index)] = question.signal;
  }
  policy.snapshot_id = 0;
  return policy;
}

std::vector<double> position_distribution(const PolicyParams& policy,
                                          int question_id, int position,
                                          double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("position_distribution: temperature must be > 0");
  }
  return softmax(row_for_position(policy, question_id, position), temperature);
}

Response sample(const PolicyParams& policy, int question_id, double temperature,
                Rng& rng) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("sample: temperature must be > 0");
  }
  Response response;
  response.question_id = question_id;
  response.snapshot_id = policy.snapshot_id;
  for (int pos = 0; pos < kSeqLen; ++pos) {
    const std::vector<double>& row = row_for_position(policy, question_id, pos);
    const std::vector<double> probs = softmax(row, temperature);
    const int index = draw_categorical(probs, rng);
    response.tokens[static_cast<std::size_t>(pos)] =
        pos == 1 ? policy.vocab.label_token(index) : index;
    response.token_logprobs[static_cast<std::size_t>(pos)] =
        log_softmax_at(row, temperature, static_cast<std::size_t>(index));
  }
  return response;
}

ResponseLogProb logprob_and_grad(const PolicyParams& policy,
                                 const Response& response, double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("logprob_and_grad: temperature must be > 0");
  }
  ResponseLogProb result;
  result.question_id = response.question_id;
  const std::size_t vocab_size = static_cast<std::size_t>(policy.vocab.size());
  for (auto& row : result.format_grad) row.assign(vocab_size, 0.0);
  result.option_grad.assign(
      static_cast<std::size_t>(policy.vocab.num_labels), 0.0);

  for (int pos = 0; pos < kSeqLen; ++pos) {
    const int token = response.tokens[static_cast<std::size_t>(pos)];
    std::size_t index;
    if (pos == 1) {
      if (!policy.vocab.is_label(token)) {
        throw std::invalid_argument(
            "logprob_and_grad: position-1 token is not a label token");
      }
      index = static_cast<std::size_t>(policy.vocab.option_of(token));
    } else {
      if (token < 0 || token >= policy.vocab.size()) {
        throw std::invalid_argument("logprob_and_grad: token out of vocabulary");
      }
      index = static_cast<std::size_t>(token);
    }

    const std::vector<double>& row =
        row_for_position(policy, response.question_id, pos);
    const double lp = log_softmax_at(row, temperature, index);
    result.per_token[static_cast<std::size_t>(pos)] = lp;
    result.total += lp;

    const std::vector<double> probs = softmax(row, temperature);
    std::vector<double>& grad_row =
        pos == 1 ? result.option_grad
                 : result.format_grad[static_cast<std::size_t>(pos)];
    for (std::size_t i = 0; i < probs.size(); ++i) {
      grad_row[i] = ((i == index ? 1.0 : 0.0) - probs[i]) / temperature;
    }
  }
  return result;
}

double kl_to_reference(const PolicyParams& policy, const PolicyParams& reference,
                       int question_id) {
  check_same_shape(policy, reference);
  double kl = 0.0;
  for (int pos = 0; pos < kSeqLen; ++pos) {
    if (pos == 1) {
      kl += kl_categorical(
          row_for_position(policy, question_id, pos),
          row_for_position(reference, question_id, pos));
    } else {
      kl += kl_categorical(policy.format_logits[static_cast<std::size_t>(pos)],
                           reference.format_logits[static_cast<std::size_t>(pos)]);
    }
  }
  return kl;
}

int greedy_answer(const PolicyParams& policy, int question_id) {
  const std::vector<double>& row = row_for_position(policy, question_id, 1);
  std::size_t best = 0;
  int ties = 1;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) {
      best = i;
      ties = 1;
    } else if (row[i] == row[best]) {
      ++ties;
    }
  }
  return ties == 1 ? static_cast<int>(best) : kNoAnswer;
}

namespace {

void write_row(std::ofstream& out, const std::vector<double>& row) {
  char buffer[64];
  for (std::size_t i = 0; i < row.size(); ++i) {
    std::snprintf(buffer, sizeof buffer, "%a", row[i]);
    out << (i == 0 ? "" : " ") << buffer;
  }
  out << '\n';
}

std::vector<double> read_row(std::istream& in, std::size_t expected) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_policy: truncated table");
  }
  std::istringstream tokens(line);
  std::vector<double> row;
  std::string word;
  while (tokens >> word) {
    // strtod handles hexfloat; istream extraction of hexfloat does not.
    char* end = nullptr;
    row.push_back(std::strtod(word.c_str(), &end));
    if (end == word.c_str()) {
      throw std::runtime_error("load_policy: bad number '" + word + "'");
    }
  }
  if (row.size() != expected) {
    throw std::runtime_error("load_policy: row width mismatch");
  }
  return row;
}

}  // namespace

void save_policy(const PolicyParams& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  out << "ttrl-policy 1\n";
  out << "snapshot " << policy.snapshot_id << '\n';
  out << "vocab " << policy.vocab.size();
  for (int t = 0; t < policy.vocab.size(); ++t) {
    out << ' ' << policy.vocab.token_name(t);
  }
  out << '\n';
  out << "questions " << policy.num_questions() << " options "
      << policy.vocab.num_labels << '\n';
  for (const auto& row : policy.format_logits) write_row(out, row);
  for (const auto& row : policy.option_logits) write_row(out, row);
  if (!out) throw std::runtime_error("save_policy: write failed for " + path);
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);

  std::string magic, version;
  in >> magic >> version;
  if (magic != "ttrl-policy" || version != "1") {
    throw std::runtime_error("load_policy: not a policy checkpoint: " + path);
  }

  PolicyParams policy;
  std::string key;
  in >> key >> policy.snapshot_id;
  if (key != "snapshot") throw std::runtime_error("load_policy: missing snapshot");

  int vocab_size = 0;
  in >> key >> vocab_size;
  if (key != "vocab" || vocab_size < kFirstLabelToken + 2) {
    throw std::runtime_error("load_policy: bad vocabulary header");
  }
  for (int t = 0; t < vocab_size; ++t) in >> key;  // token names, informational

  int num_questions = 0, num_options = 0;
  in >> key >> num_questions;
  if (key != "questions") throw std::runtime_error("load_policy: missing questions");
  in >> key >> num_options;
  if (key != "options" || num_options != vocab_size - kFirstLabelToken) {
    throw std::runtime_error("load_policy: inconsistent option count");
  }
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');

  policy.vocab.num_labels = num_options;
  for (auto& row : policy.format_logits) {
    row = read_row(in, static_cast<std::size_t>(vocab_size));
  }
  policy.option_logits.resize(static_cast<std::size_t>(num_questions));
  for (auto& row : policy.option_logits) {
    row = read_row(in, static_cast<std::size_t>(num_options));
  }
  return policy;
}

}  // namespace ttrl
