#include "ttrl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ttrl {

namespace fs = std::filesystem;

RunPaths RunPaths::in_dir(const std::string& out_dir) {
  RunPaths paths;
  paths.out_dir = out_dir;
  const auto join = [&](const char* name) {
    return (fs::path(out_dir) / name).string();
  };
  paths.effective_config = join("effective_config.json");
  paths.labels = join("labels.jsonl");
  paths.labels_current = join("labels_current.jsonl");
  paths.metrics = join("metrics.jsonl");
  paths.checkpoint_init = join("checkpoint_init.txt");
  paths.checkpoint_report = join("checkpoint_report.txt");
  paths.checkpoint_final = join("checkpoint_final.txt");
  paths.checkpoint_last = join("checkpoint_last.txt");
  paths.state = join("state.json");
  paths.baselines = join("baselines.json");
  paths.manifest = join("manifest.json");
  return paths;
}

namespace {

bool parse_bool(const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + value + "'");
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buffer[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

}  // namespace

void apply_config_entry(TrainConfig& config, const std::string& key,
                        const std::string& value) {
  try {
    if (key == "m") {
      config.vote_samples = std::stoi(value);
    } else if (key == "g") {
      config.group_size = std::stoi(value);
    } else if (key == "temperature") {
      config.temperature = std::stod(value);
    } else if (key == "steps") {
      config.steps = std::stoi(value);
    } else if (key == "batch") {
      config.batch_size = std::stoi(value);
    } else if (key == "report_step") {
      config.report_step = std::stoi(value);
    } else if (key == "weight") {
      config.weight_kind = weight_kind_from_string(value);
    } else if (key == "mas") {
      config.max_attempts = std::stoi(value);
    } else if (key == "lazy_mas") {
      config.eager_attempts = !parse_bool(value);
    } else if (key == "refresh_labels") {
      config.refresh_labels = parse_bool(value);
    } else if (key == "epsilon") {
      config.grpo.clip_epsilon = std::stod(value);
    } else if (key == "beta") {
      config.grpo.kl_beta = std::stod(value);
    } else if (key == "lr") {
      config.grpo.learning_rate = std::stod(value);
    } else if (key == "inner_epochs") {
      config.grpo.inner_epochs = std::stoi(value);
    } else if (key == "accum") {
      config.grpo.accumulation_steps = std::stoi(value);
    } else if (key == "format_bias") {
      config.format_bias = std::stod(value);
    } else if (key == "seed") {
      config.seed = std::stoull(value);
    } else if (key == "serial") {
      config.exec = parse_bool(value) ? ExecMode::kSerial : ExecMode::kParallel;
    } else if (key == "checkpoint_interval") {
      config.checkpoint_interval = std::stoi(value);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value for config key '" + key + "': '" +
                                value + "'");
  }
}

void apply_config_file(TrainConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config file: cannot open " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw std::runtime_error("config file: bad line " +
                                 std::to_string(line_no) + " in " + path);
      }
      continue;
    }
    auto trim = [](std::string s) {
      const auto begin = s.find_first_not_of(" \t\r");
      const auto end = s.find_last_not_of(" \t\r");
      return begin == std::string::npos ? std::string()
                                        : s.substr(begin, end - begin + 1);
    };
    apply_config_entry(config, trim(line.substr(0, eq)),
                       trim(line.substr(eq + 1)));
  }
}

namespace {

nlohmann::ordered_json config_json(const TrainConfig& config,
                                   const std::string& data_path) {
  nlohmann::ordered_json j;
  j["data"] = data_path;
  j["m"] = config.vote_samples;
  j["g"] = config.group_size;
  j["temperature"] = config.temperature;
  j["steps"] = config.steps;
  j["batch"] = config.batch_size;
  j["report_step"] = config.report_step;
  j["weight"] = to_string(config.weight_kind);
  j["mas"] = config.max_attempts;
  j["lazy_mas"] = !config.eager_attempts;
  j["refresh_labels"] = config.refresh_labels;
  j["epsilon"] = config.grpo.clip_epsilon;
  j["beta"] = config.grpo.kl_beta;
  j["lr"] = config.grpo.learning_rate;
  j["inner_epochs"] = config.grpo.inner_epochs;
  j["accum"] = config.grpo.accumulation_steps;
  j["format_bias"] = config.format_bias;
  j["seed"] = config.seed;
  j["serial"] = config.exec == ExecMode::kSerial;
  j["checkpoint_interval"] = config.checkpoint_interval;
  return j;
}

}  // namespace

std::string config_to_json(const TrainConfig& config,
                           const std::string& data_path) {
  return config_json(config, data_path).dump(2);
}

std::pair<TrainConfig, std::string> config_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  TrainConfig config;
  std::string data_path;
  for (const auto& [key, value] : j.items()) {
    if (key == "data") {
      data_path = value.get<std::string>();
      continue;
    }
    std::string repr;
    if (value.is_string()) {
      repr = value.get<std::string>();
    } else if (value.is_boolean()) {
      repr = value.get<bool>() ? "true" : "false";
    } else {
      repr = value.dump();
    }
    apply_config_entry(config, key, repr);
  }
  return {config, data_path};
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

// Drops any metrics lines past the checkpointed step so a resumed run appends
// from a consistent prefix.
void truncate_metrics(const std::string& path, int steps) {
  if (!fs::exists(path)) {
    if (steps != 0) throw std::runtime_error("resume: metrics file missing");
    return;
  }
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> keep;
  while (std::getline(in, line) && static_cast<int>(keep.size()) < steps) {
    keep.push_back(line);
  }
  in.close();
  if (static_cast<int>(keep.size()) < steps) {
    throw std::runtime_error("resume: metrics file shorter than checkpoint state");
  }
  std::ostringstream rebuilt;
  for (const std::string& kept : keep) rebuilt << kept << '\n';
  write_file(path, rebuilt.str());
}

}  // namespace

RunSummary run_pipeline(const std::string& data_path, const std::string& out_dir,
                        const TrainConfig& requested_config, bool resume) {
  const RunPaths paths = RunPaths::in_dir(out_dir);
  fs::create_directories(out_dir);

  TrainConfig config = requested_config;
  std::string effective_data = data_path;
  AdaptationState start_state;

  if (resume) {
    if (!fs::exists(paths.state) || !fs::exists(paths.effective_config)) {
      throw std::runtime_error("resume: no resumable run in " + out_dir);
    }
    auto [stored_config, stored_data] =
        config_from_json(read_file(paths.effective_config));
    config = stored_config;
    effective_data = stored_data;
    const nlohmann::json state = nlohmann::json::parse(read_file(paths.state));
    start_state.step = state.at("step").get<int>();
    start_state.epoch = state.at("epoch").get<int>();
    start_state.pos = state.at("pos").get<int>();
  }
  config.validate();

  const std::string started_at = iso_timestamp();
  const Dataset dataset = load_dataset(effective_data);
  const TrainingSet view = dataset.training_view();
  const DiagnosticOracle oracle = make_oracle(dataset);

  PolicyParams initial = init_policy(dataset, config.format_bias, config.seed);
  PolicyParams reference = initial;
  PolicyParams policy = initial;
  std::vector<PseudoLabel> labels;

  if (resume) {
    reference = load_policy(paths.checkpoint_init);
    policy = load_policy(paths.checkpoint_last);
    labels = load_labels(fs::exists(paths.labels_current) ? paths.labels_current
                                                          : paths.labels);
    truncate_metrics(paths.metrics, start_state.step);
  } else {
    write_file(paths.effective_config, config_to_json(config, effective_data));
    save_policy(initial, paths.checkpoint_init);
    if (fs::exists(paths.labels)) {
      // Cached pseudo-labels short-circuit the voting phase.
      labels = load_labels(paths.labels);
      if (labels.size() != dataset.size()) {
        throw std::runtime_error("label cache does not match dataset: " +
                                 paths.labels);
      }
    } else {
      labels = run_pseudo_label_phase(policy, view, config);
      save_labels(labels, paths.labels);
    }
    // Fresh runs start from an empty metrics file.
    write_file(paths.metrics, "");
    fs::remove(paths.manifest);
  }

  // Baselines on the unadapted policy, shared by analyze.
  const BaselineResult baselines = run_baselines(initial, dataset, config);
  {
    nlohmann::ordered_json j;
    j["direct_inference"] = baselines.direct_inference;
    j["majority_vote"] = baselines.majority_vote;
    j["pseudo_label_accuracy"] = oracle.label_accuracy(labels);
    write_file(paths.baselines, j.dump(2) + "\n");
  }

  std::ofstream metrics_out(paths.metrics, std::ios::app);
  if (!metrics_out) {
    throw std::runtime_error("cannot open " + paths.metrics + " for append");
  }

  const StepCallback on_step = [&](const MetricsRecord& record,
                                   const PolicyParams&) {
    metrics_out << metrics_to_json_line(record) << '\n';
    metrics_out.flush();
  };

  // The adaptation runs in checkpoint-interval segments; after each segment
  // the policy and traversal cursor are persisted so an interrupted run can
  // resume from the last segment boundary.
  AdaptationResult result;
  result.policy = policy;
  result.labels = labels;
  result.state = start_state;
  bool report_saved = fs::exists(paths.checkpoint_report) &&
                      start_state.step >= config.effective_report_step();

  while (result.state.step < config.steps) {
    const int stop_step = std::min(
        config.steps, result.state.step + config.checkpoint_interval);
    AdaptationResult segment = run_adaptation(
        result.policy, view, result.labels, config, &oracle, on_step,
        result.state, &reference, stop_step);
    result.policy = segment.policy;
    result.labels = segment.labels;
    result.state = segment.state;
    result.diverged = segment.diverged;
    for (MetricsRecord& record : segment.metrics) {
      result.metrics.push_back(std::move(record));
    }
    if (segment.report_policy) {
      result.report_policy = segment.report_policy;
      save_policy(*segment.report_policy, paths.checkpoint_report);
      report_saved = true;
    }

    save_policy(result.policy, paths.checkpoint_last);
    if (config.refresh_labels) {
      save_labels(result.labels, paths.labels_current);
    }
    nlohmann::ordered_json state;
    state["step"] = result.state.step;
    state["epoch"] = result.state.epoch;
    state["pos"] = result.state.pos;
    write_file(paths.state, state.dump() + "\n");

    if (result.diverged) break;
  }

  save_policy(result.policy, paths.checkpoint_final);
  if (!report_saved) {
    // steps below report_step: the final policy doubles as the report one.
    save_policy(result.policy, paths.checkpoint_report);
  }

  RunSummary summary;
  summary.baselines = baselines;
  summary.final_accuracy = oracle.policy_accuracy(result.policy);
  summary.report_accuracy =
      oracle.policy_accuracy(load_policy(paths.checkpoint_report));
  summary.steps_completed = result.state.step;
  summary.diverged = result.diverged;

  if (!result.diverged) {
    nlohmann::ordered_json manifest;
    manifest["config"] =
        nlohmann::ordered_json::parse(config_to_json(config, effective_data));
    nlohmann::ordered_json artifacts;
    artifacts["labels"] = paths.labels;
    artifacts["metrics"] = paths.metrics;
    artifacts["checkpoint_init"] = paths.checkpoint_init;
    artifacts["checkpoint_report"] = paths.checkpoint_report;
    artifacts["checkpoint_final"] = paths.checkpoint_final;
    artifacts["baselines"] = paths.baselines;
    manifest["artifacts"] = artifacts;
    nlohmann::ordered_json timestamps;
    timestamps["started"] = started_at;
    timestamps["finished"] = iso_timestamp();
    manifest["timestamps"] = timestamps;
    manifest["seed"] = config.seed;
    write_file(paths.manifest, manifest.dump(2) + "\n");
  }
  return summary;
}

}  // namespace ttrl
