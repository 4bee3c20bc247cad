#include "ttrl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ttrl {

int confidence_bin_index(int votes, int total_votes) {
  if (votes < 1 || total_votes < 1 || votes > total_votes) {
    throw std::invalid_argument("confidence_bin_index: bad vote counts");
  }
  // smallest i with votes/m <= (i+1)/20, i.e. ceil(20v/m) - 1
  const int scaled = 20 * votes;
  return (scaled + total_votes - 1) / total_votes - 1;
}

int confidence_bin_index(double confidence) {
  if (!(confidence > 0.0) || confidence > 1.0) {
    throw std::invalid_argument("confidence_bin_index: conf must be in (0, 1]");
  }
  const int index =
      static_cast<int>(std::ceil(confidence * kNumConfidenceBins - 1e-9)) - 1;
  return std::clamp(index, 0, kNumConfidenceBins - 1);
}

std::array<ConfidenceBin, kNumConfidenceBins> bin_confidence_accuracy(
    const std::vector<PseudoLabel>& labels, const std::vector<bool>& correct) {
  if (labels.empty()) {
    throw std::invalid_argument("bin_confidence_accuracy: empty input");
  }
  if (labels.size() != correct.size()) {
    throw std::invalid_argument(
        "bin_confidence_accuracy: correctness flags do not match labels");
  }

  std::array<ConfidenceBin, kNumConfidenceBins> bins;
  for (int i = 0; i < kNumConfidenceBins; ++i) {
    bins[static_cast<std::size_t>(i)].lower = i * 0.05;
    bins[static_cast<std::size_t>(i)].upper = (i + 1) * 0.05;
  }

  std::array<int, kNumConfidenceBins> hits{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const PseudoLabel& label = labels[i];
    int index;
    if (label.answer != kNoAnswer && label.num_votes > 0) {
      index = confidence_bin_index(
          label.label_votes[static_cast<std::size_t>(label.answer)],
          label.num_votes);
    } else {
      index = confidence_bin_index(label.confidence);
    }
    ++bins[static_cast<std::size_t>(index)].count;
    if (correct[i]) ++hits[static_cast<std::size_t>(index)];
  }
  for (int i = 0; i < kNumConfidenceBins; ++i) {
    if (bins[static_cast<std::size_t>(i)].count > 0) {
      bins[static_cast<std::size_t>(i)].mean_accuracy =
          static_cast<double>(hits[static_cast<std::size_t>(i)]) /
          static_cast<double>(bins[static_cast<std::size_t>(i)].count);
    }
  }
  return bins;
}

RegressionSummary fit_regression(
    const std::array<ConfidenceBin, kNumConfidenceBins>& bins) {
  std::vector<double> x, y;
  for (const ConfidenceBin& bin : bins) {
    if (bin.count > 0) {
      x.push_back(0.5 * (bin.lower + bin.upper));
      y.push_back(bin.mean_accuracy);
    }
  }
  if (x.size() < 2) {
    throw std::invalid_argument("fit_regression: need at least two non-empty bins");
  }

  const double n = static_cast<double>(x.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= n;
  mean_y /= n;

  RegressionSummary summary;
  summary.points_used = static_cast<int>(x.size());

  bool constant_accuracy = true;
  for (double v : y) constant_accuracy = constant_accuracy && v == y.front();
  if (constant_accuracy) {
    // Flat accuracy: the correlation is undefined, reported as zero.
    summary.degenerate = true;
    summary.slope = 0.0;
    summary.intercept = y.front();
    summary.pearson_r = 0.0;
    return summary;
  }

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    syy += (y[i] - mean_y) * (y[i] - mean_y);
    sxy += (x[i] - mean_x) * (y[i] - mean_y);
  }
  summary.slope = sxy / sxx;  // sxx > 0: distinct bins have distinct midpoints
  summary.intercept = mean_y - summary.slope * mean_x;
  summary.pearson_r = sxy / std::sqrt(sxx * syy);
  return summary;
}

std::vector<AblationArm> standard_ablation_arms() {
  return {
      {"G-MV", WeightKind::kOff, 1},
      {"+M", WeightKind::kOff, 3},
      {"+C", WeightKind::kExp, 1},
      {"+C+M", WeightKind::kExp, 3},
  };
}

AblationGrid run_ablation_grid(const Dataset& dataset,
                               const TrainConfig& base_config,
                               const std::vector<std::uint64_t>& seeds,
                               const std::vector<AblationArm>& arms) {
  AblationGrid grid;
  const TrainingSet view = dataset.training_view();
  const DiagnosticOracle oracle = make_oracle(dataset);

  for (const AblationArm& arm : arms) {
    double mean_final = 0.0;
    for (std::uint64_t seed : seeds) {
      TrainConfig config = base_config;
      config.weight_kind = arm.weight_kind;
      config.max_attempts = arm.max_attempts;
      config.seed = seed;

      const PolicyParams policy =
          init_policy(dataset, config.format_bias, seed);
      const std::vector<PseudoLabel> labels =
          run_pseudo_label_phase(policy, view, config);
      const AdaptationResult adapted =
          run_adaptation(policy, view, labels, config, &oracle);

      AblationRow row;
      row.arm = arm.name;
      row.seed = seed;
      row.final_accuracy = oracle.policy_accuracy(adapted.policy);
      row.report_accuracy = adapted.report_policy
                                ? oracle.policy_accuracy(*adapted.report_policy)
                                : row.final_accuracy;
      mean_final += row.final_accuracy;
      grid.rows.push_back(std::move(row));
    }
    grid.arm_means.emplace_back(arm.name,
                                mean_final / static_cast<double>(seeds.size()));
  }
  return grid;
}

void save_bins(const std::array<ConfidenceBin, kNumConfidenceBins>& bins,
               const RegressionSummary& regression, const std::string& path,
               bool csv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_bins: cannot open " + path);
  if (csv) {
    out << "lower,upper,count,mean_accuracy\n";
    for (const ConfidenceBin& bin : bins) {
      out << bin.lower << ',' << bin.upper << ',' << bin.count << ',';
      if (bin.count > 0) out << bin.mean_accuracy;
      out << '\n';
    }
    out << "# slope=" << regression.slope << " intercept=" << regression.intercept
        << " pearson_r=" << regression.pearson_r
        << " points=" << regression.points_used
        << " degenerate=" << (regression.degenerate ? 1 : 0) << '\n';
    return;
  }
  for (const ConfidenceBin& bin : bins) {
    nlohmann::ordered_json j;
    j["lower"] = bin.lower;
    j["upper"] = bin.upper;
    j["count"] = bin.count;
    if (bin.count > 0) {
      j["mean_accuracy"] = bin.mean_accuracy;
    } else {
      j["mean_accuracy"] = nullptr;
    }
    out << j.dump() << '\n';
  }
  nlohmann::ordered_json j;
  j["slope"] = regression.slope;
  j["intercept"] = regression.intercept;
  j["pearson_r"] = regression.pearson_r;
  j["points_used"] = regression.points_used;
  j["degenerate"] = regression.degenerate;
  out << j.dump() << '\n';
}

void save_ablation_grid(const AblationGrid& grid, const std::string& path,
                        bool csv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_ablation_grid: cannot open " + path);
  if (csv) {
    out << "arm,seed,final_accuracy,report_accuracy\n";
    for (const AblationRow& row : grid.rows) {
      out << row.arm << ',' << row.seed << ',' << row.final_accuracy << ','
          << row.report_accuracy << '\n';
    }
    for (const auto& [arm, mean] : grid.arm_means) {
      out << "# mean " << arm << ' ' << mean << '\n';
    }
    return;
  }
  for (const AblationRow& row : grid.rows) {
    nlohmann::ordered_json j;
    j["arm"] = row.arm;
    j["seed"] = row.seed;
    j["final_accuracy"] = row.final_accuracy;
    j["report_accuracy"] = row.report_accuracy;
    out << j.dump() << '\n';
  }
  nlohmann::ordered_json means;
  for (const auto& [arm, mean] : grid.arm_means) means[arm] = mean;
  nlohmann::ordered_json j;
  j["arm_means"] = means;
  out << j.dump() << '\n';
}

}  // namespace ttrl
