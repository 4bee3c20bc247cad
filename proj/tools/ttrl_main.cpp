// Command-line front end: dataset generation, adaptation runs, baselines, and
// confidence/accuracy analysis, one subcommand per pipeline stage.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ttrl/analysis.hpp"
#include "ttrl/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("TTRL_OUT_DIR");
  return env && *env ? env : ".";
}

// Holders for run flags so that only flags the user actually passed override
// the config file.
struct RunFlags {
  std::optional<int> m, g, steps, batch, report_step, mas, inner_epochs, accum,
      checkpoint_interval;
  std::optional<double> temperature, epsilon, beta, lr, format_bias;
  std::optional<std::string> weight;
  std::optional<std::uint64_t> seed;
  bool lazy_mas = false;
  bool refresh_labels = false;
  bool serial = false;

  void apply(ttrl::TrainConfig& config) const {
    using ttrl::apply_config_entry;
    if (m) config.vote_samples = *m;
    if (g) config.group_size = *g;
    if (steps) config.steps = *steps;
    if (batch) config.batch_size = *batch;
    if (report_step) config.report_step = *report_step;
    if (mas) config.max_attempts = *mas;
    if (inner_epochs) config.grpo.inner_epochs = *inner_epochs;
    if (accum) config.grpo.accumulation_steps = *accum;
    if (checkpoint_interval) config.checkpoint_interval = *checkpoint_interval;
    if (temperature) config.temperature = *temperature;
    if (epsilon) config.grpo.clip_epsilon = *epsilon;
    if (beta) config.grpo.kl_beta = *beta;
    if (lr) config.grpo.learning_rate = *lr;
    if (format_bias) config.format_bias = *format_bias;
    if (weight) config.weight_kind = ttrl::weight_kind_from_string(*weight);
    if (seed) config.seed = *seed;
    if (lazy_mas) config.eager_attempts = false;
    if (refresh_labels) config.refresh_labels = true;
    if (serial) config.exec = ttrl::ExecMode::kSerial;
  }
};

std::string arm_name(const ttrl::TrainConfig& config) {
  const bool weighting = config.weight_kind != ttrl::WeightKind::kOff;
  const bool attempts = config.max_attempts > 1;
  if (weighting && attempts) return "+C+M";
  if (weighting) return "+C";
  if (attempts) return "+M";
  return "G-MV";
}

int cmd_gen(int n, int k, double signal, std::uint64_t seed,
            const std::string& out) {
  const ttrl::Dataset dataset = ttrl::generate_dataset(n, k, signal, seed);
  ttrl::save_dataset(dataset, out);
  int zero_signal = 0;
  for (const ttrl::Question& q : dataset.questions) {
    if (q.signal == 0.0) ++zero_signal;
  }
  std::cout << "wrote " << dataset.size() << " questions (k=" << k
            << ", signal=" << signal << ", seed=" << seed << ", "
            << zero_signal << " with zero signal) to " << out << "\n";
  return 0;
}

int cmd_run(const std::string& data, const std::string& out_dir,
            const std::optional<std::string>& config_path, const RunFlags& flags,
            bool resume, const std::string& format) {
  ttrl::TrainConfig config;
  if (config_path) ttrl::apply_config_file(config, *config_path);
  flags.apply(config);
  config.validate();

  const ttrl::RunSummary summary =
      ttrl::run_pipeline(data, out_dir, config, resume);
  const ttrl::RunPaths paths = ttrl::RunPaths::in_dir(out_dir);

  if (format == "csv") {
    ttrl::save_metrics_csv(ttrl::load_metrics(paths.metrics),
                           (fs::path(out_dir) / "metrics.csv").string());
  }

  std::cout << "steps=" << summary.steps_completed
            << " di=" << summary.baselines.direct_inference
            << " dimv=" << summary.baselines.majority_vote
            << " report_accuracy=" << summary.report_accuracy
            << " final_accuracy=" << summary.final_accuracy << "\n";
  if (summary.diverged) {
    std::cerr << "run diverged: non-finite objective; last good checkpoint kept"
              << std::endl;
    return 1;
  }
  std::cout << "manifest: " << paths.manifest << "\n";
  return 0;
}

int cmd_baseline(const std::string& data, const RunFlags& flags,
                 const std::optional<std::string>& out) {
  ttrl::TrainConfig config;
  flags.apply(config);

  const ttrl::Dataset dataset = ttrl::load_dataset(data);
  const ttrl::PolicyParams policy =
      ttrl::init_policy(dataset, config.format_bias, config.seed);
  const ttrl::BaselineResult result =
      ttrl::run_baselines(policy, dataset, config);
  std::cout << "di=" << result.direct_inference
            << " dimv=" << result.majority_vote << "\n";
  if (out) {
    nlohmann::ordered_json j;
    j["direct_inference"] = result.direct_inference;
    j["majority_vote"] = result.majority_vote;
    std::ofstream file(*out);
    if (!file) {
      std::cerr << "cannot open --out file " << *out << std::endl;
      return 1;
    }
    file << j.dump(2) << "\n";
  }
  return 0;
}

nlohmann::json load_manifest_checked(const std::string& run_dir) {
  const ttrl::RunPaths paths = ttrl::RunPaths::in_dir(run_dir);
  if (!fs::exists(paths.manifest)) {
    throw std::runtime_error("no manifest in " + run_dir +
                             " (run incomplete or missing)");
  }
  std::ifstream in(paths.manifest);
  nlohmann::json manifest;
  in >> manifest;
  return manifest;
}

int cmd_analyze(const std::string& run_dir, const std::string& format) {
  const nlohmann::json manifest = load_manifest_checked(run_dir);
  const ttrl::RunPaths paths = ttrl::RunPaths::in_dir(run_dir);
  const bool csv = format == "csv";

  const ttrl::Dataset dataset =
      ttrl::load_dataset(manifest.at("config").at("data").get<std::string>());
  const std::vector<ttrl::PseudoLabel> labels = ttrl::load_labels(paths.labels);

  std::vector<bool> correct(labels.size(), false);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t q = static_cast<std::size_t>(labels[i].question_id);
    correct[i] = labels[i].answer == dataset.questions[q].truth_index;
  }

  const auto bins = ttrl::bin_confidence_accuracy(labels, correct);
  const ttrl::RegressionSummary regression = ttrl::fit_regression(bins);
  const std::string bins_path =
      (fs::path(run_dir) / (csv ? "analysis_bins.csv" : "analysis_bins.jsonl"))
          .string();
  ttrl::save_bins(bins, regression, bins_path, csv);

  // Baseline comparison against the adapted checkpoints.
  const ttrl::DiagnosticOracle oracle = ttrl::make_oracle(dataset);
  nlohmann::ordered_json comparison;
  {
    std::ifstream in(paths.baselines);
    nlohmann::json baselines;
    in >> baselines;
    comparison["direct_inference"] = baselines.at("direct_inference");
    comparison["majority_vote"] = baselines.at("majority_vote");
    comparison["pseudo_label_accuracy"] = baselines.at("pseudo_label_accuracy");
  }
  comparison["report_accuracy"] =
      oracle.policy_accuracy(ttrl::load_policy(paths.checkpoint_report));
  comparison["final_accuracy"] =
      oracle.policy_accuracy(ttrl::load_policy(paths.checkpoint_final));
  const std::string comparison_path =
      (fs::path(run_dir) / "comparison.json").string();
  std::ofstream comparison_out(comparison_path);
  comparison_out << comparison.dump(2) << "\n";

  std::cout << "bins: " << bins_path << "\n"
            << "regression: slope=" << regression.slope
            << " intercept=" << regression.intercept
            << " pearson_r=" << regression.pearson_r
            << " points=" << regression.points_used << "\n"
            << "comparison: " << comparison_path << "\n";
  return 0;
}

int cmd_analyze_grid(const std::vector<std::string>& run_dirs,
                     const std::string& out_dir, const std::string& format) {
  const bool csv = format == "csv";
  ttrl::AblationGrid grid;
  std::map<std::string, std::pair<double, int>> sums;

  for (const std::string& run_dir : run_dirs) {
    const nlohmann::json manifest = load_manifest_checked(run_dir);
    const ttrl::RunPaths paths = ttrl::RunPaths::in_dir(run_dir);
    auto [config, data_path] =
        ttrl::config_from_json(manifest.at("config").dump());
    const ttrl::Dataset dataset = ttrl::load_dataset(data_path);
    const ttrl::DiagnosticOracle oracle = ttrl::make_oracle(dataset);

    ttrl::AblationRow row;
    row.arm = arm_name(config);
    row.seed = config.seed;
    row.final_accuracy =
        oracle.policy_accuracy(ttrl::load_policy(paths.checkpoint_final));
    row.report_accuracy =
        oracle.policy_accuracy(ttrl::load_policy(paths.checkpoint_report));
    auto& [sum, count] = sums[row.arm];
    sum += row.final_accuracy;
    ++count;
    grid.rows.push_back(std::move(row));
  }
  for (const auto& [arm, sum_count] : sums) {
    grid.arm_means.emplace_back(arm, sum_count.first / sum_count.second);
  }

  const std::string grid_path =
      (fs::path(out_dir) / (csv ? "ablation_grid.csv" : "ablation_grid.jsonl"))
          .string();
  ttrl::save_ablation_grid(grid, grid_path, csv);

  std::cout << "arm  mean_final_accuracy\n";
  for (const auto& [arm, mean] : grid.arm_means) {
    std::cout << arm << "  " << mean << "\n";
  }
  std::cout << "grid: " << grid_path << "\n";
  return 0;
}

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--m", flags.m, "votes per question for pseudo-labels");
  cmd->add_option("--g", flags.g, "rollouts per update group");
  cmd->add_option("--temperature", flags.temperature, "sampling temperature");
  cmd->add_option("--steps", flags.steps, "training steps");
  cmd->add_option("--batch", flags.batch, "questions per step");
  cmd->add_option("--report-step,--report_step", flags.report_step,
                  "fixed reporting step");
  cmd->add_option("--weight", flags.weight,
                  "confidence weight: linear|sqrt|exp|off");
  cmd->add_option("--mas", flags.mas, "sampling attempts (1 disables)");
  cmd->add_flag("--lazy-mas,--lazy_mas", flags.lazy_mas,
                "stop attempts at the first non-uniform group");
  cmd->add_flag("--refresh-labels,--refresh_labels", flags.refresh_labels,
                "re-vote pseudo-labels at epoch boundaries");
  cmd->add_option("--epsilon", flags.epsilon, "clip range");
  cmd->add_option("--beta", flags.beta, "KL coefficient");
  cmd->add_option("--lr", flags.lr, "learning rate");
  cmd->add_option("--inner-epochs,--inner_epochs", flags.inner_epochs,
                  "optimizer passes per rollout batch");
  cmd->add_option("--accum", flags.accum, "gradient accumulation chunks");
  cmd->add_option("--format-bias,--format_bias", flags.format_bias,
                  "initial logit bias on the answer frame");
  cmd->add_option("--seed", flags.seed, "run seed");
  cmd->add_flag("--serial", flags.serial, "disable OpenMP kernels");
  cmd->add_option("--checkpoint-interval,--checkpoint_interval",
                  flags.checkpoint_interval, "steps between checkpoints");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time reinforcement learning on a synthetic multiple-choice "
               "environment"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  int n = 200, k = 4;
  double signal = 0.5;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--n", n, "number of questions")->check(CLI::PositiveNumber);
  gen->add_option("--k", k, "options per question")->check(CLI::Range(2, 26));
  gen->add_option("--signal", signal, "signal strength")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output dataset file")->required();

  // run
  auto* run = app.add_subcommand("run", "pseudo-label and adapt");
  std::string run_data, run_out_dir = default_out_dir(), run_format = "jsonl";
  std::optional<std::string> run_config;
  bool resume = false;
  RunFlags run_flags;
  run->add_option("--data", run_data, "dataset file")->required();
  run->add_option("--out-dir,--out_dir", run_out_dir, "run directory");
  run->add_option("--config", run_config, "flat key=value config file");
  run->add_flag("--resume", resume, "continue from the last checkpoint");
  run->add_option("--format", run_format, "also export metrics as csv")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  add_run_flags(run, run_flags);

  // baseline
  auto* baseline = app.add_subcommand("baseline", "direct-inference baselines");
  std::string baseline_data;
  std::optional<std::string> baseline_out;
  RunFlags baseline_flags;
  baseline->add_option("--data", baseline_data, "dataset file")->required();
  baseline->add_option("--out", baseline_out, "write results to a json file");
  add_run_flags(baseline, baseline_flags);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "confidence/accuracy analysis");
  std::string analyze_run, analyze_format = "jsonl";
  std::string analyze_out_dir = ".";
  std::vector<std::string> grid_dirs;
  analyze->add_option("--run", analyze_run, "completed run directory");
  analyze->add_option("--grid", grid_dirs,
                      "completed run directories for an ablation comparison");
  analyze->add_option("--out-dir,--out_dir", analyze_out_dir,
                      "output directory for --grid");
  analyze->add_option("--format", analyze_format, "output format")
      ->check(CLI::IsMember({"jsonl", "csv"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(n, k, signal, gen_seed, gen_out);
    if (run->parsed()) {
      return cmd_run(run_data, run_out_dir, run_config, run_flags, resume,
                     run_format);
    }
    if (baseline->parsed()) {
      return cmd_baseline(baseline_data, baseline_flags, baseline_out);
    }
    if (analyze->parsed()) {
      if (!grid_dirs.empty()) {
        return cmd_analyze_grid(grid_dirs, analyze_out_dir, analyze_format);
      }
      if (analyze_run.empty()) {
        std::cerr << "analyze: need --run or --grid" << std::endl;
        return 1;
      }
      return cmd_analyze(analyze_run, analyze_format);
    }
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << std::endl;
    return 1;
  }
  return 0;
}
