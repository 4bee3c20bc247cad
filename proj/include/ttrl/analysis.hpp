#pragma once

#include <array>
#include <string>
#include <vector>

#include "ttrl/labeling.hpp"
#include "ttrl/trainer.hpp"

namespace ttrl {

inline constexpr int kNumConfidenceBins = 20;

// Half-open confidence interval (lower, upper] of width 0.05.
struct ConfidenceBin {
  double lower = 0.0;
  double upper = 0.0;
  int count = 0;
  double mean_accuracy = 0.0;  // meaningful only when count > 0
};

struct RegressionSummary {
  double slope = 0.0;
  double intercept = 0.0;
  double pearson_r = 0.0;
  int points_used = 0;
  bool degenerate = false;  // accuracy variance across bins was zero
};

// Bin index for an exact vote fraction: the i with i/20 < votes/m <= (i+1)/20,
// computed in integers so boundaries like 32/64 land in (0.45, 0.50].
int confidence_bin_index(int votes, int total_votes);

// Tolerant variant for already-rounded confidence values.
int confidence_bin_index(double confidence);

// Partitions (0, 1] into 20 bins and aggregates per-bin mean correctness.
// correct[i] says whether labels[i] matches the hidden truth; computing it is
// the caller's (evaluation-side) job.
std::array<ConfidenceBin, kNumConfidenceBins> bin_confidence_accuracy(
    const std::vector<PseudoLabel>& labels, const std::vector<bool>& correct);

// Ordinary least squares on (bin midpoint, mean accuracy) over non-empty
// bins, with Pearson correlation on the same pairs. Throws with fewer than
// two non-empty bins; zero accuracy variance reports r = 0 with the
// degenerate flag instead of failing.
RegressionSummary fit_regression(
    const std::array<ConfidenceBin, kNumConfidenceBins>& bins);

// One arm of the module-ablation grid.
struct AblationArm {
  std::string name;
  WeightKind weight_kind = WeightKind::kOff;
  int max_attempts = 1;
};

// The four standard arms: no modules, sampling only, weighting only, both.
std::vector<AblationArm> standard_ablation_arms();

struct AblationRow {
  std::string arm;
  std::uint64_t seed = 0;
  double final_accuracy = 0.0;
  double report_accuracy = 0.0;
};

struct AblationGrid {
  std::vector<AblationRow> rows;
  std::vector<std::pair<std::string, double>> arm_means;  // of final accuracy
};

// Runs every arm x seed combination on the dataset. Arms differ only in
// weight kind and attempt count; everything else comes from the base config.
AblationGrid run_ablation_grid(const Dataset& dataset,
                               const TrainConfig& base_config,
                               const std::vector<std::uint64_t>& seeds,
                               const std::vector<AblationArm>& arms);

// Analysis file output: one line-delimited record per bin plus a regression
// record, and a flat table for external plotting.
void save_bins(const std::array<ConfidenceBin, kNumConfidenceBins>& bins,
               const RegressionSummary& regression, const std::string& path,
               bool csv);
void save_ablation_grid(const AblationGrid& grid, const std::string& path,
                        bool csv);

}  // namespace ttrl
