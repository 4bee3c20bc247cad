#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ttrl/trainer.hpp"

namespace ttrl {

// Canonical artifact layout inside a run directory. The manifest is written
// last; its presence marks the run as complete.
struct RunPaths {
  std::string out_dir;
  std::string effective_config;
  std::string labels;
  std::string labels_current;  // refreshed labels, only in refresh mode
  std::string metrics;
  std::string checkpoint_init;
  std::string checkpoint_report;
  std::string checkpoint_final;
  std::string checkpoint_last;
  std::string state;
  std::string baselines;
  std::string manifest;

  static RunPaths in_dir(const std::string& out_dir);
};

// One vocabulary for config keys across the config file, command-line flags,
// and the manifest.
void apply_config_entry(TrainConfig& config, const std::string& key,
                        const std::string& value);

// Flat `key = value` config file; '#' starts a comment.
void apply_config_file(TrainConfig& config, const std::string& path);

std::string config_to_json(const TrainConfig& config,
                           const std::string& data_path);
std::pair<TrainConfig, std::string> config_from_json(const std::string& text);

struct RunSummary {
  BaselineResult baselines;
  double final_accuracy = 0.0;
  double report_accuracy = 0.0;
  int steps_completed = 0;
  bool diverged = false;
};

// Full pipeline: pseudo-label phase (cached), adaptation with periodic
// checkpoints, baselines, manifest. With resume, continues an interrupted run
// from its last checkpoint; the stored effective config wins over the one
// passed in.
RunSummary run_pipeline(const std::string& data_path, const std::string& out_dir,
                        const TrainConfig& config, bool resume = false);

}  // namespace ttrl
