// Benchmark comparing the serial reference kernels against the OpenMP ones on
// the two hot paths: the voting phase and the adaptation steps. Also checks
// that both modes produce identical results, which the per-stream rng design
// and fixed-order reductions guarantee.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "ttrl/parallel.hpp"
#include "ttrl/trainer.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct BenchResult {
  double label_phase_s = 0.0;
  double adaptation_s = 0.0;
  std::vector<ttrl::MetricsRecord> metrics;
  ttrl::PolicyParams policy;
};

BenchResult run_once(const ttrl::Dataset& dataset, ttrl::TrainConfig config,
                     ttrl::ExecMode mode) {
  config.exec = mode;
  const ttrl::TrainingSet view = dataset.training_view();
  const ttrl::PolicyParams policy =
      ttrl::init_policy(dataset, config.format_bias, config.seed);

  BenchResult result;
  auto start = Clock::now();
  const std::vector<ttrl::PseudoLabel> labels =
      ttrl::run_pseudo_label_phase(policy, view, config);
  result.label_phase_s = seconds_since(start);

  start = Clock::now();
  ttrl::AdaptationResult adapted =
      ttrl::run_adaptation(policy, view, labels, config);
  result.adaptation_s = seconds_since(start);
  result.metrics = std::move(adapted.metrics);
  result.policy = std::move(adapted.policy);
  return result;
}

bool same_policy(const ttrl::PolicyParams& a, const ttrl::PolicyParams& b) {
  for (int pos = 0; pos < ttrl::kSeqLen; ++pos) {
    if (a.format_logits[static_cast<std::size_t>(pos)] !=
        b.format_logits[static_cast<std::size_t>(pos)]) {
      return false;
    }
  }
  return a.option_logits == b.option_logits;
}

}  // namespace

int main(int argc, char** argv) {
  int n = 2000;
  int steps = 50;
  if (argc > 1) n = std::atoi(argv[1]);
  if (argc > 2) steps = std::atoi(argv[2]);

  ttrl::TrainConfig config;
  config.steps = steps;
  config.report_step = std::min(config.report_step, steps);
  config.seed = 9;

  std::printf("questions=%d steps=%d threads=%d\n", n, steps,
              ttrl::max_threads());

  const ttrl::Dataset dataset = ttrl::generate_dataset(n, 4, 0.8, 9);
  const BenchResult serial = run_once(dataset, config, ttrl::ExecMode::kSerial);
  const BenchResult parallel =
      run_once(dataset, config, ttrl::ExecMode::kParallel);

  std::printf("%-16s %10s %10s %8s\n", "kernel", "serial_s", "openmp_s",
              "speedup");
  std::printf("%-16s %10.3f %10.3f %7.2fx\n", "label_phase",
              serial.label_phase_s, parallel.label_phase_s,
              serial.label_phase_s / parallel.label_phase_s);
  std::printf("%-16s %10.3f %10.3f %7.2fx\n", "adaptation",
              serial.adaptation_s, parallel.adaptation_s,
              serial.adaptation_s / parallel.adaptation_s);

  bool identical = same_policy(serial.policy, parallel.policy) &&
                   serial.metrics.size() == parallel.metrics.size();
  if (identical) {
    for (std::size_t i = 0; i < serial.metrics.size(); ++i) {
      if (ttrl::metrics_to_json_line(serial.metrics[i]) !=
          ttrl::metrics_to_json_line(parallel.metrics[i])) {
        identical = false;
        break;
      }
    }
  }
  std::printf("serial/openmp results identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
