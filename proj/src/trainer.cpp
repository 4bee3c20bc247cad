#include "ttrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>

#include "json.hpp"

#include "ttrl/reward.hpp"
#include "ttrl/sampling.hpp"

namespace ttrl {

void TrainConfig::validate() const {
  if (vote_samples < 1) throw std::invalid_argument("config: m must be >= 1");
  if (group_size < 2) throw std::invalid_argument("config: g must be >= 2");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("config: temperature must be > 0");
  }
  if (steps < 0) throw std::invalid_argument("config: steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch must be >= 1");
  if (report_step < 0 || report_step > steps) {
    throw std::invalid_argument("config: report_step must be <= steps");
  }
  if (max_attempts < 1) throw std::invalid_argument("config: mas must be >= 1");
  if (format_bias < 0.0) {
    throw std::invalid_argument("config: format_bias must be >= 0");
  }
  if (checkpoint_interval < 1) {
    throw std::invalid_argument("config: checkpoint_interval must be >= 1");
  }
  grpo.validate();
}

DiagnosticOracle make_oracle(const Dataset& dataset) {
  DiagnosticOracle oracle;
  oracle.policy_accuracy = [&dataset](const PolicyParams& policy) {
    std::vector<int> answers(dataset.size(), kNoAnswer);
    for (std::size_t q = 0; q < dataset.size(); ++q) {
      answers[q] = greedy_answer(policy, static_cast<int>(q));
    }
    return eval_accuracy(dataset, answers);
  };
  oracle.label_accuracy = [&dataset](const std::vector<PseudoLabel>& labels) {
    std::vector<int> answers(dataset.size(), kNoAnswer);
    for (const PseudoLabel& label : labels) {
      answers[static_cast<std::size_t>(label.question_id)] = label.answer;
    }
    return eval_accuracy(dataset, answers);
  };
  return oracle;
}

namespace {

std::vector<PseudoLabel> vote_all(const PolicyParams& policy,
                                  const TrainingSet& questions,
                                  const TrainConfig& config, StreamTag tag,
                                  std::uint64_t salt) {
  std::vector<PseudoLabel> labels(questions.size());
  parallel_for(questions.size(), config.exec, [&](std::size_t q) {
    const int qid = questions.questions[q].id;
    Rng rng = make_stream(config.seed, tag, salt,
                          static_cast<std::uint64_t>(qid));
    labels[q] = generate_pseudo_label(policy, qid, config.vote_samples,
                                      config.temperature, rng);
  });
  return labels;
}

std::vector<int> usable_question_ids(const std::vector<PseudoLabel>& labels) {
  std::vector<int> usable;
  usable.reserve(labels.size());
  for (const PseudoLabel& label : labels) {
    if (label.answer != kNoAnswer) usable.push_back(label.question_id);
  }
  return usable;
}

std::vector<int> epoch_permutation(const std::vector<int>& usable,
                                   std::uint64_t seed, int epoch) {
  std::vector<int> perm = usable;
  Rng rng = make_stream(seed, StreamTag::kShuffle,
                        static_cast<std::uint64_t>(epoch));
  for (std::size_t i = perm.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

}  // namespace

std::vector<PseudoLabel> run_pseudo_label_phase(const PolicyParams& policy,
                                                const TrainingSet& questions,
                                                const TrainConfig& config) {
  config.validate();
  if (questions.size() == 0) {
    throw std::invalid_argument("pseudo-label phase: empty dataset");
  }
  std::vector<PseudoLabel> labels =
      vote_all(policy, questions, config, StreamTag::kVotes, 0);
  if (usable_question_ids(labels).empty()) {
    throw std::runtime_error(
        "pseudo-label phase: every question is unparseable; "
        "the policy never emits answer tokens");
  }
  return labels;
}

AdaptationResult run_adaptation(const PolicyParams& policy,
                                const TrainingSet& questions,
                                const std::vector<PseudoLabel>& labels,
                                const TrainConfig& config,
                                const DiagnosticOracle* oracle,
                                const StepCallback& on_step,
                                const AdaptationState& start,
                                const PolicyParams* reference, int stop_step) {
  config.validate();
  if (labels.size() != questions.size()) {
    throw std::invalid_argument("adaptation: labels do not match dataset");
  }
  const PolicyParams& frozen_reference = reference ? *reference : policy;
  const int last_step =
      stop_step < 0 ? config.steps : std::min(stop_step, config.steps);

  AdaptationResult result;
  result.policy = policy;
  result.labels = labels;
  result.state = start;

  std::vector<int> usable = usable_question_ids(result.labels);
  if (usable.empty()) {
    throw std::runtime_error("adaptation: no usable pseudo-labels");
  }
  std::vector<int> perm =
      epoch_permutation(usable, config.seed, result.state.epoch);

  const int batch = config.batch_size;
  const std::size_t num_groups = static_cast<std::size_t>(batch);

  for (int step = result.state.step; step < last_step; ++step) {
    // Assemble the batch, wrapping epochs as needed.
    std::vector<int> batch_ids(num_groups);
    for (int b = 0; b < batch; ++b) {
      if (result.state.pos == static_cast<int>(perm.size())) {
        ++result.state.epoch;
        result.state.pos = 0;
        if (config.refresh_labels) {
          result.labels = vote_all(
              result.policy, questions, config, StreamTag::kRefresh,
              static_cast<std::uint64_t>(result.state.epoch));
          usable = usable_question_ids(result.labels);
          if (usable.empty()) {
            throw std::runtime_error("adaptation: refresh left no usable labels");
          }
        }
        perm = epoch_permutation(usable, config.seed, result.state.epoch);
      }
      batch_ids[static_cast<std::size_t>(b)] =
          perm[static_cast<std::size_t>(result.state.pos++)];
    }

    // pi_old for this step; rollouts are drawn from it.
    const PolicyParams snapshot = result.policy;

    std::vector<ScoredGroup> groups(num_groups);
    std::vector<int> attempts(num_groups, 0);
    parallel_for(num_groups, config.exec, [&](std::size_t slot) {
      const int qid = batch_ids[slot];
      Rng rng = make_stream(config.seed, StreamTag::kRollout,
                            static_cast<std::uint64_t>(step), slot);
      SamplingOutcome outcome = sample_with_attempts(
          snapshot, qid, config.group_size, config.temperature,
          config.max_attempts, rng, config.eager_attempts);
      attempts[slot] = outcome.attempts_used;

      const PseudoLabel& label =
          result.labels[static_cast<std::size_t>(qid)];
      std::vector<double> rewards;
      rewards.reserve(outcome.group.responses.size());
      for (const Response& response : outcome.group.responses) {
        rewards.push_back(score(response, snapshot.vocab, label).total);
      }
      groups[slot].advantages =
          compute_advantages(rewards, label.confidence, config.weight_kind);
      groups[slot].rollouts = std::move(outcome.group);
    });

    // Inner epochs over the same rollouts; gradients accumulate over fixed
    // chunks so the batch mean is reassembled deterministically.
    MetricsRecord record;
    record.step = step + 1;
    bool finite = true;
    for (int inner = 0; inner < config.grpo.inner_epochs && finite; ++inner) {
      PolicyGradient total = PolicyGradient::zeros_like(result.policy);
      double objective = 0.0;
      double clipped = 0.0;
      const int chunks = std::min(config.grpo.accumulation_steps, batch);
      std::size_t begin = 0;
      for (int c = 0; c < chunks; ++c) {
        const std::size_t remaining = num_groups - begin;
        const std::size_t chunk_size =
            (remaining + static_cast<std::size_t>(chunks - c) - 1) /
            static_cast<std::size_t>(chunks - c);
        const std::span<const ScoredGroup> chunk(groups.data() + begin,
                                                 chunk_size);
        const double share = static_cast<double>(chunk_size) /
                             static_cast<double>(num_groups);
        SurrogateResult partial =
            surrogate_and_grad(result.policy, snapshot, frozen_reference, chunk,
                               config.grpo, config.exec);
        total.add_scaled(partial.gradient, share);
        objective += share * partial.report.objective;
        clipped += share * partial.report.clipped_fraction;
        begin += chunk_size;
      }
      record.objective = objective;
      record.clipped_fraction = clipped;
      if (!std::isfinite(objective) || !total.is_finite()) {
        finite = false;
        break;
      }
      result.policy =
          apply_update(result.policy, total, config.grpo.learning_rate);
    }

    if (!finite) {
      // Keep the last good parameters (pre-step) and stop.
      result.policy = snapshot;
      result.diverged = true;
      break;
    }

    record.attempts_histogram.assign(
        static_cast<std::size_t>(config.max_attempts), 0);
    double conf_sum = 0.0;
    for (std::size_t slot = 0; slot < num_groups; ++slot) {
      ++record.attempts_histogram[static_cast<std::size_t>(attempts[slot] - 1)];
      if (groups[slot].advantages.collapsed) ++record.collapse_count;
      conf_sum += result.labels[static_cast<std::size_t>(batch_ids[slot])]
                      .confidence;
    }
    record.mean_confidence = conf_sum / static_cast<double>(num_groups);
    record.eval_accuracy =
        oracle ? oracle->policy_accuracy(result.policy)
               : std::numeric_limits<double>::quiet_NaN();
    record.pseudo_label_accuracy =
        oracle ? oracle->label_accuracy(result.labels)
               : std::numeric_limits<double>::quiet_NaN();

    result.state.step = step + 1;
    if (record.step == config.effective_report_step()) {
      result.report_policy = result.policy;
    }
    result.metrics.push_back(record);
    if (on_step) on_step(record, result.policy);
  }

  if (config.steps == 0) {
    result.report_policy = result.policy;
  }
  return result;
}

BaselineResult run_baselines(const PolicyParams& policy, const Dataset& dataset,
                             const TrainConfig& config) {
  BaselineResult result;

  std::vector<int> direct(dataset.size(), kNoAnswer);
  for (std::size_t q = 0; q < dataset.size(); ++q) {
    direct[q] = greedy_answer(policy, static_cast<int>(q));
  }
  result.direct_inference = eval_accuracy(dataset, direct);

  std::vector<int> voted(dataset.size(), kNoAnswer);
  parallel_for(dataset.size(), config.exec, [&](std::size_t q) {
    Rng rng = make_stream(config.seed, StreamTag::kBaseline, 0,
                          static_cast<std::uint64_t>(q));
    const PseudoLabel label =
        generate_pseudo_label(policy, static_cast<int>(q), config.vote_samples,
                              config.temperature, rng);
    voted[q] = label.answer;
  });
  result.majority_vote = eval_accuracy(dataset, voted);
  return result;
}

namespace {

nlohmann::ordered_json metrics_to_json(const MetricsRecord& record) {
  nlohmann::ordered_json j;
  j["step"] = record.step;
  if (std::isfinite(record.eval_accuracy)) {
    j["eval_accuracy"] = record.eval_accuracy;
  } else {
    j["eval_accuracy"] = nullptr;
  }
  if (std::isfinite(record.pseudo_label_accuracy)) {
    j["pseudo_label_accuracy"] = record.pseudo_label_accuracy;
  } else {
    j["pseudo_label_accuracy"] = nullptr;
  }
  j["mean_confidence"] = record.mean_confidence;
  j["collapse_count"] = record.collapse_count;
  j["attempts_histogram"] = record.attempts_histogram;
  j["objective"] = record.objective;
  j["clipped_fraction"] = record.clipped_fraction;
  return j;
}

}  // namespace

std::string metrics_to_json_line(const MetricsRecord& record) {
  return metrics_to_json(record).dump();
}

MetricsRecord metrics_from_json_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  MetricsRecord record;
  record.step = j.at("step").get<int>();
  record.eval_accuracy = j.at("eval_accuracy").is_null()
                             ? std::numeric_limits<double>::quiet_NaN()
                             : j.at("eval_accuracy").get<double>();
  record.pseudo_label_accuracy =
      j.at("pseudo_label_accuracy").is_null()
          ? std::numeric_limits<double>::quiet_NaN()
          : j.at("pseudo_label_accuracy").get<double>();
  record.mean_confidence = j.at("mean_confidence").get<double>();
  record.collapse_count = j.at("collapse_count").get<int>();
  record.attempts_histogram = j.at("attempts_histogram").get<std::vector<int>>();
  record.objective = j.at("objective").get<double>();
  record.clipped_fraction = j.at("clipped_fraction").get<double>();
  return record;
}

std::vector<MetricsRecord> load_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_metrics: cannot open " + path);
  std::vector<MetricsRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(metrics_from_json_line(line));
  }
  return records;
}

void save_metrics_csv(const std::vector<MetricsRecord>& records,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_metrics_csv: cannot open " + path);
  out << "step,eval_accuracy,pseudo_label_accuracy,mean_confidence,"
         "collapse_count,attempts_1,attempts_2,attempts_3,objective,"
         "clipped_fraction\n";
  for (const MetricsRecord& r : records) {
    out << r.step << ',' << r.eval_accuracy << ',' << r.pseudo_label_accuracy
        << ',' << r.mean_confidence << ',' << r.collapse_count;
    for (int a = 0; a < 3; ++a) {
      out << ',';
      if (a < static_cast<int>(r.attempts_histogram.size())) {
        out << r.attempts_histogram[static_cast<std::size_t>(a)];
      } else {
        out << 0;
      }
    }
    out << ',' << r.objective << ',' << r.clipped_fraction << '\n';
  }
}

}  // namespace ttrl
