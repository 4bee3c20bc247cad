#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ttrl/mcq_env.hpp"
#include "ttrl/rng.hpp"

namespace ttrl {

// Responses are always three tokens: an opening format token, an answer
// token, a closing format token.
inline constexpr int kSeqLen = 3;

inline constexpr int kTokenOpen = 0;
inline constexpr int kTokenClose = 1;
inline constexpr int kTokenNoise = 2;
inline constexpr int kFirstLabelToken = 3;

// Token alphabet: [OPEN, CLOSE, NOISE, label tokens for the K options].
struct Vocabulary {
  int num_labels = 0;

  int size() const { return kFirstLabelToken + num_labels; }
  bool is_label(int token) const {
    return token >= kFirstLabelToken && token < size();
  }
  int label_token(int option_index) const { return kFirstLabelToken + option_index; }
  int option_of(int token) const { return token - kFirstLabelToken; }

  std::string token_name(int token) const;
};

// Position-conditioned categorical policy. Positions 0 and 2 draw from the
// shared format table over the full vocabulary; position 1 draws the answer
// from a per-question table over the K label tokens. The middle format row is
// kept so the table stays [3 x vocab] but it carries no distribution.
struct PolicyParams {
  Vocabulary vocab;
  std::array<std::vector<double>, kSeqLen> format_logits;
  std::vector<std::vector<double>> option_logits;  // [num_questions][K]
  std::uint64_t snapshot_id = 0;

  int num_questions() const { return static_cast<int>(option_logits.size()); }
};

// One sampled response with the log-probabilities it was generated under.
struct Response {
  int question_id = 0;
  std::array<int, kSeqLen> tokens{};
  std::array<double, kSeqLen> token_logprobs{};
  std::uint64_t snapshot_id = 0;
};

// Gradient of a single response's total log-probability, organized to mirror
// PolicyParams. The option part is sparse: only the response's question row.
struct ResponseLogProb {
  double total = 0.0;
  std::array<double, kSeqLen> per_token{};
  std::array<std::vector<double>, kSeqLen> format_grad;
  std::vector<double> option_grad;  // d logprob / d option_logits[question_id]
  int question_id = 0;
};

// Builds the initial policy from a dataset: format rows favor OPEN at
// position 0 and CLOSE at position 2 by +format_bias, and each question's
// option row gets its signal on the hidden-truth index. This is the one
// training-side consumer of the ground truth, by construction of the setup.
// The seed parameter is reserved for perturbed-init experiments and does not
// affect the tables.
PolicyParams init_policy(const Dataset& dataset, double format_bias,
                         std::uint64_t seed);

// Tempered distribution at one position (position 1 is over the K labels,
// positions 0 and 2 over the whole vocabulary). Exposed for tests and for
// closed-form collapse probabilities.
std::vector<double> position_distribution(const PolicyParams& policy,
                                          int question_id, int position,
                                          double temperature);

// Draws one response token-by-token from softmax(logits / temperature) and
// records the log-probabilities under that same tempered distribution.
Response sample(const PolicyParams& policy, int question_id,
                double temperature, Rng& rng);

// Log-probability of a response's tokens under the CURRENT policy at the
// given temperature, with the analytic gradient with respect to the logits:
// (one_hot(token) - softmax(logits / T)) / T per position.
ResponseLogProb logprob_and_grad(const PolicyParams& policy,
                                 const Response& response, double temperature);

// Exact categorical KL(policy || reference) summed over the three positions
// of one question, on the untempered distributions.
double kl_to_reference(const PolicyParams& policy, const PolicyParams& reference,
                       int question_id);

// Deterministic argmax answer used by evaluation paths (direct inference and
// per-step accuracy). Returns kNoAnswer when the argmax is not unique, i.e.
// the policy has no preference at all for this question.
int greedy_answer(const PolicyParams& policy, int question_id);

// Text checkpoint with hexfloat payload; round-trips bit-exactly.
void save_policy(const PolicyParams& policy, const std::string& path);
PolicyParams load_policy(const std::string& path);

}  // namespace ttrl
