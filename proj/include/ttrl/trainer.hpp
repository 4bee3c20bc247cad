#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ttrl/advantage.hpp"
#include "ttrl/grpo.hpp"
#include "ttrl/labeling.hpp"
#include "ttrl/mcq_env.hpp"
#include "ttrl/parallel.hpp"
#include "ttrl/policy.hpp"

namespace ttrl {

struct TrainConfig {
  int vote_samples = 64;   // majority-vote sample count per question
  int group_size = 4;      // rollouts per update group
  double temperature = 1.0;
  int steps = 500;
  int batch_size = 8;      // questions per optimizer step
  int report_step = 0;     // fixed reporting step; 0 = auto, min(100, steps)
  WeightKind weight_kind = WeightKind::kExp;
  int max_attempts = 3;    // 1 disables multiple-attempt sampling
  bool eager_attempts = true;
  bool refresh_labels = false;  // re-vote pseudo-labels at epoch boundaries
  double format_bias = 4.0;     // initial logit bias on the OPEN/CLOSE frame
  GrpoConfig grpo;
  std::uint64_t seed = 1;
  ExecMode exec = ExecMode::kParallel;
  int checkpoint_interval = 50;

  int effective_report_step() const {
    return report_step == 0 ? std::min(100, steps) : report_step;
  }
  void validate() const;
};

struct MetricsRecord {
  int step = 0;
  double eval_accuracy = 0.0;          // oracle-only diagnostic
  double pseudo_label_accuracy = 0.0;  // oracle-only diagnostic
  double mean_confidence = 0.0;        // over this step's batch
  int collapse_count = 0;              // zero-spread groups this step
  std::vector<int> attempts_histogram; // counts over attempts_used 1..max
  double objective = 0.0;
  double clipped_fraction = 0.0;
};

// Evaluation hooks handed to the adaptation loop. The loop itself only sees
// the truth-stripped TrainingSet; anything that needs the hidden ground truth
// comes in through these opaque callbacks, which only feed diagnostics.
struct DiagnosticOracle {
  std::function<double(const PolicyParams&)> policy_accuracy;
  std::function<double(const std::vector<PseudoLabel>&)> label_accuracy;
};

DiagnosticOracle make_oracle(const Dataset& dataset);

// Stage 1: majority-vote every question once, in advance. Each question owns
// its rng stream, so the phase parallelizes without affecting results.
// Throws if every question comes out unparseable.
std::vector<PseudoLabel> run_pseudo_label_phase(const PolicyParams& policy,
                                                const TrainingSet& questions,
                                                const TrainConfig& config);

// Resumable cursor into the shuffled-cycling traversal of usable questions.
struct AdaptationState {
  int step = 0;
  int epoch = 0;
  int pos = 0;
};

struct AdaptationResult {
  PolicyParams policy;
  std::optional<PolicyParams> report_policy;  // set when report_step was crossed
  std::vector<MetricsRecord> metrics;         // records emitted by this call
  std::vector<PseudoLabel> labels;            // current labels (refresh mode)
  AdaptationState state;
  bool diverged = false;
};

using StepCallback =
    std::function<void(const MetricsRecord&, const PolicyParams&)>;

// Stage 2: step-wise adaptation. Each step draws batch_size questions from
// the shuffled cycle, samples rollout groups with multiple attempts, scores
// them against the frozen pseudo-labels, group-normalizes with the confidence
// weight, and applies the clipped update. Emits one MetricsRecord per step.
// On a non-finite objective the loop stops and returns the last good policy
// with diverged set. `reference` is the frozen pre-adaptation policy for the
// KL term; it defaults to the input policy and matters for resumed runs.
// `stop_step` pauses the loop early (checkpoint segmenting) without changing
// the configured total.
AdaptationResult run_adaptation(const PolicyParams& policy,
                                const TrainingSet& questions,
                                const std::vector<PseudoLabel>& labels,
                                const TrainConfig& config,
                                const DiagnosticOracle* oracle = nullptr,
                                const StepCallback& on_step = nullptr,
                                const AdaptationState& start = {},
                                const PolicyParams* reference = nullptr,
                                int stop_step = -1);

struct BaselineResult {
  double direct_inference = 0.0;   // greedy answer per question
  double majority_vote = 0.0;      // modal answer over vote_samples draws
};

// Evaluation-only baselines; both read the hidden truth.
BaselineResult run_baselines(const PolicyParams& policy, const Dataset& dataset,
                             const TrainConfig& config);

// Metrics file helpers (line-delimited records, one per step).
std::string metrics_to_json_line(const MetricsRecord& record);
MetricsRecord metrics_from_json_line(const std::string& line);
std::vector<MetricsRecord> load_metrics(const std::string& path);
void save_metrics_csv(const std::vector<MetricsRecord>& records,
                      const std::string& path);

}  // namespace ttrl
